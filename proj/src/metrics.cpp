#include "gridrl/metrics.hpp"

#include <string>

namespace gridrl {

std::vector<std::string> score_config_violations(const ScoreConfig& c) {
  std::vector<std::string> out;
  if (!(c.beta > 1.0)) out.emplace_back("beta must be > 1");
  if (!(c.dt_hours > 0.0)) out.emplace_back("dt_hours must be > 0");
  return out;
}

void EvalHistory::record(int chronic, std::int64_t step, int episode_length) {
  auto& v = per_chronic[chronic];
  if (!v.empty() && v.back().step >= step) throw MetricsError("evaluation steps must be strictly increasing");
  v.push_back({step, episode_length});
}

std::int64_t s2c(const EvalHistory& history, int chronic) {
  const auto it = history.per_chronic.find(chronic);
  if (it == history.per_chronic.end() || it->second.empty()) {
    throw MetricsError("no evaluations recorded for chronic " + std::to_string(chronic));
  }
  const auto len = history.chronic_length.find(chronic);
  if (len == history.chronic_length.end()) throw MetricsError("unknown length for chronic " + std::to_string(chronic));
  std::int64_t result = history.total_steps;
  const auto& points = it->second;
  for (auto p = points.rbegin(); p != points.rend(); ++p) {
    if (p->episode_length != len->second) break;
    result = p->step;
  }
  return result;
}

double episode_cost(const EpisodeTrace& trace, const Chronic& chronic, const ScoreConfig& config) {
  if (trace.chronic_id != chronic.id) throw MetricsError("trace and chronic ids differ");
  if (trace.offset < 0 || trace.horizon <= 0 || trace.offset + trace.horizon > chronic.length() ||
      static_cast<int>(trace.steps.size()) > trace.horizon) {
    throw MetricsError("trace window does not fit chronic " + std::to_string(chronic.id));
  }
  const int t_end = trace.episode_length();
  double cost = 0.0;
  for (int t = 0; t < t_end; ++t) {
    cost += trace.steps[t].total_loss * chronic.price(trace.offset + t) * config.dt_hours;
  }
  for (int t = t_end; t < trace.horizon; ++t) {
    const int k = trace.offset + t;
    cost += config.beta * chronic.load_p.row(k).sum() * chronic.price(k) * config.dt_hours;
  }
  return cost;
}

double l2rpn_score(double cost_agent, double cost_do_nothing) {
  if (!(cost_do_nothing > 0.0)) throw MetricsError("DoNothing cost must be positive");
  return 100.0 * (cost_do_nothing - cost_agent) / (0.8 * cost_do_nothing);
}

BaselineResult do_nothing_baseline(std::shared_ptr<const GridSpec> spec, const ChronicView& view,
                                   const EnvConfig& env_config, const ScoreConfig& config, std::uint64_t seed) {
  Environment env(std::move(spec), env_config);
  BaselineResult r;
  r.trace = run_episode(env, view, seed, do_nothing_policy());
  r.cost = episode_cost(r.trace, view.chronic(), config);
  return r;
}

}  // namespace gridrl
