#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridrl/environment.hpp"
#include "gridrl/metrics.hpp"
#include "gridrl/nn/encoders.hpp"
#include "gridrl/ppo.hpp"

namespace gridrl {

struct RunConfig {
  std::filesystem::path grid_path;
  std::filesystem::path chronics_dir;
  std::vector<int> train_chronics;
  std::vector<int> test_chronics;
  EnvConfig env;
  PPOConfig ppo;
  ScoreConfig score;
  nn::EncoderKind encoder = nn::EncoderKind::kFlat;
  bool train_opponent = false;
  /// Keep best.bin chosen by greedy replays of the training chronics.
  bool select_checkpoint = true;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";
};

/// Defaults pointing at the bundled fixture under `data_root`.
RunConfig default_run_config(const std::filesystem::path& data_root);

/// INI file with sections [run], [env], [opponent], [ppo], [score].
/// Relative paths resolve against the file's directory. Unknown keys are
/// rejected.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
std::string to_ini(const RunConfig& config);

/// Empty when usable. Checks paths, the train/test split and every
/// sub-config.
std::vector<std::string> run_config_violations(const RunConfig& config);

std::vector<int> parse_id_list(const std::string& text);

}  // namespace gridrl
