#include "gridrl/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gridrl/fixtures.hpp"

namespace gridrl {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"run",
       {"grid", "chronics", "train_chronics", "test_chronics", "encoder", "train_opponent", "select_checkpoint", "seed", "out"}},
      {"env",
       {"nb_timestep_overflow_allowed", "nb_timestep_reconnection", "nb_timestep_cooldown_line",
        "nb_timestep_cooldown_sub", "hard_overflow_threshold", "max_sub_changed", "max_line_status_changed",
        "horizon"}},
      {"opponent", {"attack_probability", "attack_duration", "attack_cooldown", "attackable_lines"}},
      {"ppo",
       {"gamma", "lambda", "clip_epsilon", "value_coef", "entropy_coef", "epochs", "minibatch_size",
        "rollout_length", "workers", "total_steps", "learning_rate", "max_grad_norm", "normalize_advantages",
        "eval_interval"}},
      {"score", {"beta", "dt_hours"}}};
  return keys;
}

bool parse_switch(const std::string& v) {
  const std::string s = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(v));
  if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
  if (s == "off" || s == "false" || s == "0" || s == "no") return false;
  throw ConfigurationError("expected on/off, got '" + v + "'");
}

std::string join(const std::vector<int>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? "," : "") << ids[i];
  return os.str();
}

template <typename T>
void read(const pt::ptree& tree, const char* key, T& out) {
  // get_optional would swallow a malformed value; get throws on it.
  if (tree.count(key)) out = tree.get<T>(key);
}

}  // namespace

std::vector<int> parse_id_list(const std::string& text) {
  std::vector<int> ids;
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::algorithm::is_any_of(", "), boost::algorithm::token_compress_on);
  for (const auto& p : parts) {
    if (p.empty()) continue;
    try {
      std::size_t used = 0;
      const int v = std::stoi(p, &used);
      if (used != p.size()) throw std::invalid_argument(p);
      ids.push_back(v);
    } catch (const std::exception&) {
      throw ConfigurationError("bad chronic id '" + p + "'");
    }
  }
  return ids;
}

RunConfig default_run_config(const std::filesystem::path& data_root) {
  RunConfig c;
  c.grid_path = data_root / "grid.json";
  c.chronics_dir = data_root / "chronics";
  c.train_chronics = fixture_train_ids();
  c.test_chronics = fixture_test_ids();
  return c;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigurationError(std::string("config parse error: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigurationError("unknown config section [" + section + "]");
    for (const auto& [key, _] : body) {
      if (!it->second.count(key)) throw ConfigurationError("unknown key '" + key + "' in [" + section + "]");
    }
  }

  RunConfig c = default_run_config(base_dir / "data" / "case5");
  auto resolve_path = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  try {
    const pt::ptree empty;
    const auto& run = tree.get_child("run", empty);
    if (auto v = run.get_optional<std::string>("grid")) c.grid_path = resolve_path(*v);
    if (auto v = run.get_optional<std::string>("chronics")) c.chronics_dir = resolve_path(*v);
    if (auto v = run.get_optional<std::string>("train_chronics")) c.train_chronics = parse_id_list(*v);
    if (auto v = run.get_optional<std::string>("test_chronics")) c.test_chronics = parse_id_list(*v);
    if (auto v = run.get_optional<std::string>("encoder")) c.encoder = nn::encoder_from_string(*v);
    if (auto v = run.get_optional<std::string>("train_opponent")) c.train_opponent = parse_switch(*v);
    if (auto v = run.get_optional<std::string>("select_checkpoint")) c.select_checkpoint = parse_switch(*v);
    read(run, "seed", c.seed);
    if (auto v = run.get_optional<std::string>("out")) c.out_dir = resolve_path(*v);

    const auto& env = tree.get_child("env", empty);
    read(env, "nb_timestep_overflow_allowed", c.env.nb_timestep_overflow_allowed);
    read(env, "nb_timestep_reconnection", c.env.nb_timestep_reconnection);
    read(env, "nb_timestep_cooldown_line", c.env.nb_timestep_cooldown_line);
    read(env, "nb_timestep_cooldown_sub", c.env.nb_timestep_cooldown_sub);
    read(env, "hard_overflow_threshold", c.env.hard_overflow_threshold);
    read(env, "max_sub_changed", c.env.max_sub_changed);
    read(env, "max_line_status_changed", c.env.max_line_status_changed);
    read(env, "horizon", c.env.horizon);

    const auto& opp = tree.get_child("opponent", empty);
    read(opp, "attack_probability", c.env.opponent.attack_probability);
    read(opp, "attack_duration", c.env.opponent.attack_duration);
    read(opp, "attack_cooldown", c.env.opponent.attack_cooldown);
    if (auto v = opp.get_optional<std::string>("attackable_lines")) c.env.opponent.attackable = parse_id_list(*v);

    const auto& ppo = tree.get_child("ppo", empty);
    read(ppo, "gamma", c.ppo.gamma);
    read(ppo, "lambda", c.ppo.lambda);
    read(ppo, "clip_epsilon", c.ppo.clip_epsilon);
    read(ppo, "value_coef", c.ppo.value_coef);
    read(ppo, "entropy_coef", c.ppo.entropy_coef);
    read(ppo, "epochs", c.ppo.epochs);
    read(ppo, "minibatch_size", c.ppo.minibatch_size);
    read(ppo, "rollout_length", c.ppo.rollout_length);
    read(ppo, "workers", c.ppo.workers);
    read(ppo, "total_steps", c.ppo.total_steps);
    read(ppo, "learning_rate", c.ppo.learning_rate);
    read(ppo, "max_grad_norm", c.ppo.max_grad_norm);
    if (auto v = ppo.get_optional<std::string>("normalize_advantages")) c.ppo.normalize_advantages = parse_switch(*v);
    read(ppo, "eval_interval", c.ppo.eval_interval);

    const auto& score = tree.get_child("score", empty);
    read(score, "beta", c.score.beta);
    read(score, "dt_hours", c.score.dt_hours);
  } catch (const pt::ptree_bad_data& e) {
    throw ConfigurationError(std::string("config value error: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigurationError(e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigurationError("cannot open config " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "[run]\n"
     << "grid = " << c.grid_path.string() << "\n"
     << "chronics = " << c.chronics_dir.string() << "\n"
     << "train_chronics = " << join(c.train_chronics) << "\n"
     << "test_chronics = " << join(c.test_chronics) << "\n"
     << "encoder = " << nn::to_string(c.encoder) << "\n"
     << "train_opponent = " << (c.train_opponent ? "on" : "off") << "\n"
     << "select_checkpoint = " << (c.select_checkpoint ? "on" : "off") << "\n"
     << "seed = " << c.seed << "\n"
     << "out = " << c.out_dir.string() << "\n\n";
  os << "[env]\n"
     << "nb_timestep_overflow_allowed = " << c.env.nb_timestep_overflow_allowed << "\n"
     << "nb_timestep_reconnection = " << c.env.nb_timestep_reconnection << "\n"
     << "nb_timestep_cooldown_line = " << c.env.nb_timestep_cooldown_line << "\n"
     << "nb_timestep_cooldown_sub = " << c.env.nb_timestep_cooldown_sub << "\n"
     << "hard_overflow_threshold = " << c.env.hard_overflow_threshold << "\n"
     << "max_sub_changed = " << c.env.max_sub_changed << "\n"
     << "max_line_status_changed = " << c.env.max_line_status_changed << "\n"
     << "horizon = " << c.env.horizon << "\n\n";
  os << "[opponent]\n"
     << "attack_probability = " << c.env.opponent.attack_probability << "\n"
     << "attack_duration = " << c.env.opponent.attack_duration << "\n"
     << "attack_cooldown = " << c.env.opponent.attack_cooldown << "\n"
     << "attackable_lines = " << join(c.env.opponent.attackable) << "\n\n";
  os << "[ppo]\n"
     << "gamma = " << c.ppo.gamma << "\n"
     << "lambda = " << c.ppo.lambda << "\n"
     << "clip_epsilon = " << c.ppo.clip_epsilon << "\n"
     << "value_coef = " << c.ppo.value_coef << "\n"
     << "entropy_coef = " << c.ppo.entropy_coef << "\n"
     << "epochs = " << c.ppo.epochs << "\n"
     << "minibatch_size = " << c.ppo.minibatch_size << "\n"
     << "rollout_length = " << c.ppo.rollout_length << "\n"
     << "workers = " << c.ppo.workers << "\n"
     << "total_steps = " << c.ppo.total_steps << "\n"
     << "learning_rate = " << c.ppo.learning_rate << "\n"
     << "max_grad_norm = " << c.ppo.max_grad_norm << "\n"
     << "normalize_advantages = " << (c.ppo.normalize_advantages ? "on" : "off") << "\n"
     << "eval_interval = " << c.ppo.eval_interval << "\n\n";
  os << "[score]\n"
     << "beta = " << c.score.beta << "\n"
     << "dt_hours = " << c.score.dt_hours << "\n";
  return os.str();
}

std::vector<std::string> run_config_violations(const RunConfig& c) {
  std::vector<std::string> out;
  if (!std::filesystem::is_regular_file(c.grid_path)) out.push_back("grid file not found: " + c.grid_path.string());
  if (!std::filesystem::is_directory(c.chronics_dir)) {
    out.push_back("chronics directory not found: " + c.chronics_dir.string());
  }
  if (c.train_chronics.empty()) out.emplace_back("no training chronics");
  for (int id : c.train_chronics) {
    if (std::find(c.test_chronics.begin(), c.test_chronics.end(), id) != c.test_chronics.end()) {
      out.push_back("chronic " + std::to_string(id) + " is reserved for testing and cannot be used for training");
    }
  }
  for (auto& m : config_violations(c.env)) out.push_back("env: " + m);
  for (auto& m : ppo_config_violations(c.ppo)) out.push_back("ppo: " + m);
  for (auto& m : score_config_violations(c.score)) out.push_back("score: " + m);
  return out;
}

}  // namespace gridrl
