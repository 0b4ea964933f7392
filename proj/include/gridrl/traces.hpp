#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gridrl/environment.hpp"

namespace gridrl {

struct TraceStep {
  int step = 0;
  std::vector<int> actions;
  ActionClass action_class = ActionClass::kLegal;
  double reward = 0.0;
  Eigen::VectorXd rho;
  double total_loss = 0.0;
  double slack_p = 0.0;
  bool terminated = false;
  bool truncated = false;

  bool operator==(const TraceStep&) const;
};

struct EpisodeTrace {
  int chronic_id = 0;
  bool opponent = false;
  int offset = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
  std::vector<TraceStep> steps;

  /// Steps survived: the horizon if the episode was truncated, otherwise
  /// the index of the terminal step.
  int episode_length() const;
  double reward_sum() const;
  bool operator==(const EpisodeTrace&) const;
};

using PolicyFn = std::function<TopoAction(const Environment&)>;

/// Resets env on view and plays until termination or truncation.
EpisodeTrace run_episode(Environment& env, const ChronicView& view, std::uint64_t seed, const PolicyFn& policy);

PolicyFn do_nothing_policy();

/// JSONL: one header record, then one record per step.
std::string to_jsonl(const EpisodeTrace& trace);
EpisodeTrace trace_from_jsonl(const std::string& text);
void write_trace(const std::filesystem::path& path, const EpisodeTrace& trace);
EpisodeTrace read_trace(const std::filesystem::path& path);

}  // namespace gridrl
