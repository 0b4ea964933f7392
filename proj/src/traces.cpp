#include "gridrl/traces.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gridrl {

using nlohmann::json;

namespace {

// Non-finite values (diverged flows) travel as null.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double read_number(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json number_array(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Eigen::VectorXd read_number_array(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = read_number(a[i]);
  }
  return v;
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

}  // namespace

bool TraceStep::operator==(const TraceStep& o) const {
  return step == o.step && actions == o.actions && action_class == o.action_class && std::memcmp(&reward, &o.reward, sizeof reward) == 0 &&
         same_bits(rho, o.rho) && std::memcmp(&total_loss, &o.total_loss, sizeof total_loss) == 0 &&
         std::memcmp(&slack_p, &o.slack_p, sizeof slack_p) == 0 &&
         terminated == o.terminated && truncated == o.truncated;
}

bool EpisodeTrace::operator==(const EpisodeTrace& o) const {
  return chronic_id == o.chronic_id && opponent == o.opponent && offset == o.offset && horizon == o.horizon &&
         seed == o.seed && steps == o.steps;
}

int EpisodeTrace::episode_length() const {
  for (const auto& s : steps) {
    if (s.terminated) return s.step;
    if (s.truncated) return horizon;
  }
  return static_cast<int>(steps.size());
}

double EpisodeTrace::reward_sum() const {
  double r = 0.0;
  for (const auto& s : steps) r += s.reward;
  return r;
}

EpisodeTrace run_episode(Environment& env, const ChronicView& view, std::uint64_t seed, const PolicyFn& policy) {
  EpisodeTrace trace;
  trace.chronic_id = view.chronic().id;
  trace.opponent = env.config().opponent.enabled;
  trace.offset = view.offset();
  trace.horizon = view.horizon();
  trace.seed = seed;
  env.reset(view, seed);
  while (!env.done()) {
    const TopoAction action = policy(env);
    const int t = env.state().step_index;
    const StepOutcome out = env.step(action);
    TraceStep s;
    s.step = t;
    s.actions = action.choices();
    s.action_class = out.info.action_class;
    s.reward = out.reward;
    s.rho = out.info.rho;
    s.total_loss = out.info.total_loss;
    s.slack_p = out.info.slack_p;
    s.terminated = out.terminated;
    s.truncated = out.truncated;
    trace.steps.push_back(std::move(s));
  }
  return trace;
}

PolicyFn do_nothing_policy() {
  return [](const Environment& env) { return TopoAction::do_nothing(env.action_layout()); };
}

std::string to_jsonl(const EpisodeTrace& trace) {
  std::ostringstream os;
  json header = {{"type", "header"},      {"chronic", trace.chronic_id}, {"opponent", trace.opponent},
                 {"offset", trace.offset}, {"horizon", trace.horizon},    {"seed", trace.seed}};
  os << header.dump() << "\n";
  for (const auto& s : trace.steps) {
    json j = {{"step", s.step},
              {"actions", s.actions},
              {"class", to_string(s.action_class)},
              {"reward", s.reward},
              {"rho", number_array(s.rho)},
              {"total_loss", number(s.total_loss)},
              {"slack_p", number(s.slack_p)},
              {"terminated", s.terminated},
              {"truncated", s.truncated}};
    os << j.dump() << "\n";
  }
  return os.str();
}

EpisodeTrace trace_from_jsonl(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  EpisodeTrace trace;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (!have_header) {
      if (j.value("type", "") != "header") throw std::runtime_error("trace does not start with a header record");
      trace.chronic_id = j.at("chronic").get<int>();
      trace.opponent = j.at("opponent").get<bool>();
      trace.offset = j.value("offset", 0);
      trace.horizon = j.at("horizon").get<int>();
      trace.seed = j.at("seed").get<std::uint64_t>();
      have_header = true;
      continue;
    }
    TraceStep s;
    s.step = j.at("step").get<int>();
    s.actions = j.at("actions").get<std::vector<int>>();
    s.action_class = action_class_from_string(j.at("class").get<std::string>());
    s.reward = j.at("reward").get<double>();
    s.rho = read_number_array(j.at("rho"));
    s.total_loss = read_number(j.at("total_loss"));
    s.slack_p = read_number(j.at("slack_p"));
    s.terminated = j.at("terminated").get<bool>();
    s.truncated = j.at("truncated").get<bool>();
    trace.steps.push_back(std::move(s));
  }
  if (!have_header) throw std::runtime_error("empty trace");
  return trace;
}

void write_trace(const std::filesystem::path& path, const EpisodeTrace& trace) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_jsonl(trace);
}

EpisodeTrace read_trace(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return trace_from_jsonl(buf.str());
}

}  // namespace gridrl
