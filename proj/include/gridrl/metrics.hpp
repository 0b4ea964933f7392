#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "gridrl/chronics.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/traces.hpp"

namespace gridrl {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ScoreConfig {
  double beta = 2.0;              // blackout penalty
  double dt_hours = 1.0 / 12.0;  // one 5-minute step
};

std::vector<std::string> score_config_violations(const ScoreConfig& c);

struct EvalPoint {
  std::int64_t step = 0;
  int episode_length = 0;
};

struct EvalHistory {
  std::map<int, std::vector<EvalPoint>> per_chronic;
  std::map<int, int> chronic_length;
  std::int64_t total_steps = 0;

  void record(int chronic, std::int64_t step, int episode_length);
};

/// First evaluated step from which every later evaluation of the chronic
/// ran to full length; total_steps if the last evaluation fell short.
std::int64_t s2c(const EvalHistory& history, int chronic);

/// Operation cost over the survived steps plus blackout cost for the rest
/// of the trace's window.
double episode_cost(const EpisodeTrace& trace, const Chronic& chronic, const ScoreConfig& config);

/// 0 at the DoNothing cost, 100 at 80% savings; linear and unclamped.
double l2rpn_score(double cost_agent, double cost_do_nothing);

struct BaselineResult {
  EpisodeTrace trace;
  double cost = 0.0;
};

BaselineResult do_nothing_baseline(std::shared_ptr<const GridSpec> spec, const ChronicView& view,
                                   const EnvConfig& env_config, const ScoreConfig& config, std::uint64_t seed);

}  // namespace gridrl
