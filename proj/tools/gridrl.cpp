// Command-line front end: validate, powerflow, observe, gen-fixtures,
// train, evaluate, score, replay.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gridrl/chronics.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/fixtures.hpp"
#include "gridrl/metrics.hpp"
#include "gridrl/nn/checkpoint.hpp"
#include "gridrl/observations.hpp"
#include "gridrl/ppo.hpp"
#include "gridrl/run_config.hpp"
#include "gridrl/traces.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace gridrl;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitDiverged = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string encoder;
  std::string opponent;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (INI)");
  cmd->add_option("--seed", c.seed, "Seed for every random stream of the run");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--encoder", c.encoder, "flat | substation-graph | element-graph");
  cmd->add_option("--opponent", c.opponent, "on | off")->check(CLI::IsMember({"on", "off"}));
}

RunConfig resolve_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? default_run_config("data/case5") : load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.encoder.empty()) cfg.encoder = nn::encoder_from_string(c.encoder);
  if (!c.opponent.empty()) cfg.train_opponent = c.opponent == "on";
  return cfg;
}

std::vector<int> all_ids(const RunConfig& cfg) {
  std::set<int> ids(cfg.train_chronics.begin(), cfg.train_chronics.end());
  ids.insert(cfg.test_chronics.begin(), cfg.test_chronics.end());
  return {ids.begin(), ids.end()};
}

struct Loaded {
  std::shared_ptr<const GridSpec> spec;
  std::map<int, std::shared_ptr<const Chronic>> chronics;
};

Loaded load_inputs(const RunConfig& cfg, const std::vector<int>& ids) {
  Loaded l;
  l.spec = std::make_shared<const GridSpec>(load_grid_spec(cfg.grid_path));
  for (auto& c : load_chronics(cfg.chronics_dir, *l.spec, ids)) l.chronics.emplace(c->id, c);
  return l;
}

void require_valid(const RunConfig& cfg) {
  const auto issues = run_config_violations(cfg);
  if (!issues.empty()) throw ConfigurationError(issues.front());
}

std::string trace_name(int chronic, bool opponent) {
  return "chronic_" + std::to_string(chronic) + (opponent ? "_opp_on" : "_opp_off") + ".jsonl";
}

// ---- validate ------------------------------------------------------------

int cmd_validate(const Common& common) {
  const RunConfig cfg = resolve_config(common);
  int problems = 0;
  for (const auto& m : run_config_violations(cfg)) {
    std::cout << "config: " << m << "\n";
    ++problems;
  }
  if (!fs::is_regular_file(cfg.grid_path)) {
    std::cout << "FAIL\n";
    return kExitInvalid;
  }
  GridSpec spec;
  try {
    std::ifstream is(cfg.grid_path);
    std::stringstream buf;
    buf << is.rdbuf();
    spec = parse_grid_spec(buf.str());
    const auto issues = validate_spec(spec);
    for (const auto& v : issues) std::cout << "grid: " << v.element << ": " << v.rule << "\n";
    if (!issues.empty()) {
      std::cout << "FAIL\n";
      return kExitInvalid;
    }
    resolve(spec);
  } catch (const std::exception& e) {
    std::cout << "grid: " << e.what() << "\n";
    std::cout << "FAIL\n";
    return kExitInvalid;
  }
  std::cout << "grid: " << spec.n_sub() << " substations, " << spec.n_gen() << " generators, " << spec.n_load()
            << " loads, " << spec.n_line() << " lines\n";
  for (int id : all_ids(cfg)) {
    try {
      const Chronic c = load_chronic(cfg.chronics_dir / std::to_string(id), spec, id);
      const auto issues = chronic_violations(spec, c);
      for (const auto& m : issues) std::cout << "chronic " << id << ": " << m << "\n";
      problems += static_cast<int>(issues.size());
    } catch (const std::exception& e) {
      std::cout << "chronic " << id << ": " << e.what() << "\n";
      ++problems;
    }
  }
  std::cout << (problems == 0 ? "OK" : "FAIL") << "\n";
  return problems == 0 ? kExitOk : kExitInvalid;
}

// ---- powerflow / observe -------------------------------------------------

int cmd_powerflow(const Common& common, int chronic_id, int step) {
  const RunConfig cfg = resolve_config(common);
  const Loaded in = load_inputs(cfg, {chronic_id});
  const GridSpec& spec = *in.spec;
  const auto view = full_view(in.chronics.at(chronic_id));
  if (step < 0 || step >= view.horizon()) throw RangeError("step outside the chronic");
  const GridState state = default_state(spec);
  const PowerFlowResult r = solve(spec, state, {view.gen_p(step), view.load_p(step)});
  ordered_json j;
  j["chronic"] = chronic_id;
  j["step"] = step;
  j["diverged"] = r.diverged;
  j["total_loss"] = r.total_loss;
  j["slack_p"] = r.slack_p;
  j["slack_within_limits"] = apply_slack_limits(spec, r);
  for (int g = 0; g < spec.n_gen(); ++g) j["generators"].push_back({{"id", spec.generators[g].id}, {"p", r.gen_p(g)}});
  for (int d = 0; d < spec.n_load(); ++d) j["loads"].push_back({{"id", spec.loads[d].id}, {"p", r.load_served(d)}});
  for (int l = 0; l < spec.n_line(); ++l) {
    j["lines"].push_back(
        {{"id", spec.lines[l].id}, {"flow", r.line_flow(l)}, {"rho", r.rho(l)}, {"loss", r.line_loss(l)}});
  }
  std::cout << j.dump(2) << "\n";
  return r.diverged ? kExitDiverged : kExitOk;
}

int cmd_observe(const Common& common, int chronic_id, int step) {
  const RunConfig cfg = resolve_config(common);
  const Loaded in = load_inputs(cfg, {chronic_id});
  const GridSpec& spec = *in.spec;
  const auto view = full_view(in.chronics.at(chronic_id));
  if (step < 0 || step >= view.horizon()) throw RangeError("step outside the chronic");
  const GridState state = default_state(spec);
  const PowerFlowResult r = solve(spec, state, {view.gen_p(step), view.load_p(step)});
  switch (cfg.encoder) {
    case nn::EncoderKind::kFlat:
      std::cout << to_json(build_flat(spec, state, r)) << "\n";
      break;
    case nn::EncoderKind::kSubstationGraph:
      std::cout << to_json(build_substation_graph(spec, state, r)) << "\n";
      break;
    case nn::EncoderKind::kElementGraph:
      std::cout << to_json(build_element_graph(spec, state, r)) << "\n";
      break;
  }
  return kExitOk;
}

// ---- gen-fixtures --------------------------------------------------------

int cmd_gen_fixtures(const Common& common) {
  const fs::path out = common.out.empty() ? fs::path("data/case5") : fs::path(common.out);
  write_fixture_bundle(out, common.seed.value_or(kFixtureSeed));
  std::cout << "wrote " << out.string() << "\n";
  return kExitOk;
}

// ---- train ---------------------------------------------------------------

int cmd_train(const Common& common, const std::string& resume, std::optional<std::int64_t> steps) {
  RunConfig cfg = resolve_config(common);
  if (steps) cfg.ppo.total_steps = *steps;
  require_valid(cfg);
  const Loaded in = load_inputs(cfg, all_ids(cfg));
  nn::PolicyNetwork policy(cfg.encoder, *in.spec, cfg.seed);
  TrainSetup setup;
  setup.spec = in.spec;
  setup.chronics = in.chronics;
  setup.train_ids = cfg.train_chronics;
  setup.eval_ids = cfg.test_chronics;
  setup.env = cfg.env;
  setup.ppo = cfg.ppo;
  setup.train_opponent = cfg.train_opponent;
  setup.seed = cfg.seed;
  setup.out_dir = cfg.out_dir;
  if (cfg.select_checkpoint) setup.select_ids = cfg.train_chronics;
  if (!resume.empty()) setup.start_step = nn::load_checkpoint(resume, policy);
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream os(cfg.out_dir / "config.ini");
    os << to_ini(cfg);
  }
  setup.on_update = [](const UpdateRecord& r) {
    std::cerr << "step " << r.step << "  episodes " << r.episodes << "  mean_reward " << r.mean_episode_reward
              << "  entropy " << r.entropy << "\n";
    return true;
  };
  const TrainResult result = train(setup, policy);
  if (result.diverged) {
    std::cerr << "training diverged at step " << result.steps << ": " << result.message << "\n";
    return kExitDiverged;
  }
  nn::save_checkpoint(cfg.out_dir / "final.bin", policy, result.steps);
  std::cout << "trained " << result.steps << " steps; artifacts in " << cfg.out_dir.string() << "\n";
  if (result.best_step >= 0) std::cout << "best.bin taken at step " << result.best_step << "\n";
  return kExitOk;
}

// ---- evaluate ------------------------------------------------------------

int cmd_evaluate(const Common& common, const std::string& checkpoint, bool do_nothing) {
  const RunConfig cfg = resolve_config(common);
  require_valid(cfg);
  if (checkpoint.empty() && !do_nothing) throw ConfigurationError("evaluate needs --checkpoint or --do-nothing");
  const std::vector<int> ids = all_ids(cfg);
  const Loaded in = load_inputs(cfg, ids);
  std::unique_ptr<nn::PolicyNetwork> policy;
  if (!do_nothing) {
    policy = std::make_unique<nn::PolicyNetwork>(cfg.encoder, *in.spec, cfg.seed);
    nn::load_checkpoint(checkpoint, *policy);
  }
  const fs::path trace_dir = cfg.out_dir / "traces";
  fs::create_directories(trace_dir);
  std::ofstream table(cfg.out_dir / "results.csv");
  table << "chronic,opponent,episode_length,chronic_length,reward_sum\n";
  for (int id : ids) {
    for (bool opponent : {false, true}) {
      const std::uint64_t seed = eval_seed(cfg.seed, id, opponent);
      EpisodeTrace trace;
      if (policy) {
        trace = evaluate_episode(*policy, in.spec, cfg.env, in.chronics.at(id), opponent, seed);
      } else {
        EnvConfig env = cfg.env;
        env.opponent.enabled = opponent;
        Environment e(in.spec, env);
        trace = run_episode(e, full_view(in.chronics.at(id)), seed, do_nothing_policy());
      }
      write_trace(trace_dir / trace_name(id, opponent), trace);
      table << id << "," << (opponent ? "on" : "off") << "," << trace.episode_length() << ","
            << in.chronics.at(id)->length() << "," << std::setprecision(17) << trace.reward_sum() << "\n";
    }
  }
  std::cout << "evaluated " << ids.size() << " chronics x 2 opponent modes into " << cfg.out_dir.string() << "\n";
  return kExitOk;
}

// ---- score ---------------------------------------------------------------

// s2c per chronic from an eval log, opponent off.
std::map<int, std::int64_t> s2c_from_log(const fs::path& path, std::int64_t total_steps) {
  std::map<int, std::int64_t> out;
  std::ifstream is(path);
  if (!is) return out;
  EvalHistory h;
  h.total_steps = total_steps;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.at("opponent").get<bool>()) continue;
    const int c = j.at("chronic").get<int>();
    h.chronic_length[c] = j.at("chronic_length").get<int>();
    h.record(c, j.at("step").get<std::int64_t>(), j.at("episode_length").get<int>());
  }
  for (const auto& [c, _] : h.per_chronic) out[c] = s2c(h, c);
  return out;
}

int cmd_score(const Common& common, const std::vector<std::string>& trace_dirs, const std::string& baseline_dir,
              const std::string& eval_log) {
  const RunConfig cfg = resolve_config(common);
  require_valid(cfg);
  if (trace_dirs.empty()) throw ConfigurationError("score needs at least one --traces directory");
  const bool opponent = common.opponent == "on";
  const std::vector<int> ids = all_ids(cfg);
  const Loaded in = load_inputs(cfg, ids);

  std::map<int, double> baseline;
  for (int id : ids) {
    const fs::path p = fs::path(baseline_dir) / trace_name(id, opponent);
    const Chronic& c = *in.chronics.at(id);
    if (!baseline_dir.empty() && fs::exists(p)) {
      baseline[id] = episode_cost(read_trace(p), c, cfg.score);
    } else {
      EnvConfig env = cfg.env;
      env.opponent.enabled = opponent;
      baseline[id] =
          do_nothing_baseline(in.spec, full_view(in.chronics.at(id)), env, cfg.score, eval_seed(cfg.seed, id, opponent))
              .cost;
    }
  }
  const auto s2c_map = eval_log.empty() ? std::map<int, std::int64_t>{} : s2c_from_log(eval_log, cfg.ppo.total_steps);

  fs::create_directories(cfg.out_dir);
  std::ofstream csv(cfg.out_dir / "scores.csv");
  csv << "chronic,run,cost_agent,cost_do_nothing,score,s2c\n";
  csv << std::setprecision(17);
  std::map<int, std::vector<double>> per_chronic;
  for (std::size_t run = 0; run < trace_dirs.size(); ++run) {
    for (int id : ids) {
      const fs::path p = fs::path(trace_dirs[run]) / trace_name(id, opponent);
      if (!fs::exists(p)) throw ConfigurationError("missing trace " + p.string());
      const double cost = episode_cost(read_trace(p), *in.chronics.at(id), cfg.score);
      const double score = l2rpn_score(cost, baseline.at(id));
      per_chronic[id].push_back(score);
      csv << id << "," << run << "," << cost << "," << baseline.at(id) << "," << score << ",";
      if (const auto it = s2c_map.find(id); it != s2c_map.end()) csv << it->second;
      csv << "\n";
    }
  }
  ordered_json summary;
  summary["opponent"] = opponent;
  summary["runs"] = trace_dirs.size();
  double test_mean = 0.0;
  int test_count = 0;
  for (const auto& [id, scores] : per_chronic) {
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    const double sd = scores.size() > 1 ? std::sqrt(var / static_cast<double>(scores.size() - 1)) : 0.0;
    ordered_json row = {{"chronic", id}, {"score_mean", mean}, {"score_std", sd}};
    if (const auto it = s2c_map.find(id); it != s2c_map.end()) row["s2c"] = it->second;
    summary["chronics"].push_back(row);
    if (std::find(cfg.test_chronics.begin(), cfg.test_chronics.end(), id) != cfg.test_chronics.end()) {
      test_mean += mean;
      ++test_count;
    }
  }
  if (test_count > 0) summary["held_out_score_mean"] = test_mean / test_count;
  std::ofstream(cfg.out_dir / "summary.json") << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

// ---- replay --------------------------------------------------------------

int cmd_replay(const Common& common, const std::string& trace_path) {
  const RunConfig cfg = resolve_config(common);
  const EpisodeTrace recorded = read_trace(trace_path);
  const Loaded in = load_inputs(cfg, {recorded.chronic_id});
  EnvConfig env_cfg = cfg.env;
  env_cfg.opponent.enabled = recorded.opponent;
  Environment env(in.spec, env_cfg);
  std::size_t k = 0;
  const ChronicView view(in.chronics.at(recorded.chronic_id), recorded.offset, recorded.horizon);
  const EpisodeTrace replayed = run_episode(env, view, recorded.seed, [&](const Environment& e) {
    if (k >= recorded.steps.size()) return TopoAction::do_nothing(e.action_layout());
    return TopoAction(e.action_layout(), recorded.steps[k++].actions);
  });
  const bool same = replayed == recorded;
  std::cout << "chronic " << recorded.chronic_id << ", " << recorded.steps.size() << " recorded steps, episode length "
            << replayed.episode_length() << ", reward sum " << std::setprecision(17) << replayed.reward_sum() << "\n";
  std::cout << (same ? "replay matches the recorded trace" : "replay DIFFERS from the recorded trace") << "\n";
  return same ? kExitOk : kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology-control reinforcement learning on a DC grid model"};
  app.require_subcommand(1);
  Common common;

  auto* validate = app.add_subcommand("validate", "Check the grid, chronics and configuration");
  add_common(validate, common);

  int chronic = 0;
  int step = 0;
  auto* powerflow = app.add_subcommand("powerflow", "Solve the default topology at one chronic step");
  add_common(powerflow, common);
  powerflow->add_option("--chronic", chronic)->default_val(0);
  powerflow->add_option("--step", step)->default_val(0);

  auto* observe = app.add_subcommand("observe", "Print the observation of one chronic step");
  add_common(observe, common);
  observe->add_option("--chronic", chronic)->default_val(0);
  observe->add_option("--step", step)->default_val(0);

  auto* gen = app.add_subcommand("gen-fixtures", "Write the synthetic 5-substation grid and 20 chronics");
  add_common(gen, common);

  std::string resume;
  std::optional<std::int64_t> steps;
  auto* train_cmd = app.add_subcommand("train", "Train a masked PPO agent");
  add_common(train_cmd, common);
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");
  train_cmd->add_option("--steps", steps, "Override total training steps");

  std::string checkpoint;
  bool do_nothing = false;
  auto* evaluate = app.add_subcommand("evaluate", "Greedy episodes on every chronic, with and without opponent");
  add_common(evaluate, common);
  evaluate->add_option("--checkpoint", checkpoint);
  evaluate->add_flag("--do-nothing", do_nothing, "Evaluate the all-do-nothing agent");

  std::vector<std::string> trace_dirs;
  std::string baseline_dir;
  std::string eval_log;
  auto* score = app.add_subcommand("score", "Cost, score and S2C tables from evaluation traces");
  add_common(score, common);
  score->add_option("--traces", trace_dirs, "Trace directories, one per run")->take_all();
  score->add_option("--baseline", baseline_dir, "DoNothing trace directory");
  score->add_option("--eval-log", eval_log, "Training eval log, for S2C");

  std::string trace_path;
  auto* replay = app.add_subcommand("replay", "Re-simulate a trace and compare");
  add_common(replay, common);
  replay->add_option("trace", trace_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(common);
    if (*powerflow) return cmd_powerflow(common, chronic, step);
    if (*observe) return cmd_observe(common, chronic, step);
    if (*gen) return cmd_gen_fixtures(common);
    if (*train_cmd) return cmd_train(common, resume, steps);
    if (*evaluate) return cmd_evaluate(common, checkpoint, do_nothing);
    if (*score) return cmd_score(common, trace_dirs, baseline_dir, eval_log);
    if (*replay) return cmd_replay(common, trace_path);
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
