#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "gridrl/action_space.hpp"
#include "gridrl/chronics.hpp"
#include "gridrl/grid_model.hpp"
#include "gridrl/powerflow.hpp"

namespace gridrl {

struct OpponentConfig {
  bool enabled = false;
  double attack_probability = 0.02;  // per step
  int attack_duration = 12;
  int attack_cooldown = 144;
  std::vector<int> attackable;  // line indices; empty means every line
};

struct EnvConfig {
  int nb_timestep_overflow_allowed = 3;
  int nb_timestep_reconnection = 12;
  int nb_timestep_cooldown_line = 3;
  int nb_timestep_cooldown_sub = 3;
  double hard_overflow_threshold = 2.0;  // ratio of thermal_limit
  int max_sub_changed = 9999;
  int max_line_status_changed = 9999;
  int horizon = kDefaultHorizon;
  OpponentConfig opponent;
};

/// Empty when the config is usable, otherwise one message per problem.
std::vector<std::string> config_violations(const EnvConfig& config);

class ScenarioInfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct AttackEvent {
  int line = -1;
  int step = 0;
  int duration = 0;
};

struct StepInfo {
  ActionClass action_class = ActionClass::kLegal;
  bool substituted = false;  // illegal action replaced by do-nothing
  Eigen::VectorXd rho;
  double total_loss = 0.0;
  double slack_p = 0.0;
  double gen_sum = 0.0;
  double load_sum = 0.0;
  double price = 0.0;
  std::vector<AttackEvent> attacks;
  std::vector<int> overflow_disconnections;
};

struct StepOutcome {
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

/// Reward of a step: 0 after an erroneous or illegal action, 1 when no
/// power is generated, otherwise (MaxLoss - Loss) / MaxLoss with
/// MaxLoss = M * sum(gen) and Loss = M * (sum(gen) - sum(load)).
double compute_reward(ActionClass prev_action, double gen_sum, double load_sum, double price);
double compute_reward(ActionClass prev_action, const PowerFlowResult& flow, double price);

/// Possibly starts an attack. Draws exactly one uniform number whenever
/// the opponent is enabled, no attack runs and its cooldown has elapsed.
std::vector<AttackEvent> opponent_step(const GridSpec& spec, GridState& state, const OpponentConfig& config,
                                       std::mt19937_64& rng);

/// One episode of topological control over a chronic window.
class Environment {
 public:
  Environment(std::shared_ptr<const GridSpec> spec, EnvConfig config);

  /// Default topology, timers cleared, initial flow at view step 0.
  void reset(ChronicView view, std::uint64_t seed);
  StepOutcome step(const TopoAction& action);

  const GridSpec& spec() const { return *spec_; }
  std::shared_ptr<const GridSpec> spec_ptr() const { return spec_; }
  const EnvConfig& config() const { return config_; }
  EnvConfig& mutable_config() { return config_; }
  const ActionLayout& action_layout() const { return layout_; }
  const GridState& state() const { return state_; }
  const PowerFlowResult& flow() const { return flow_; }
  const ChronicView& chronic() const { return view_; }
  ActionMask mask() const { return compute_mask(*spec_, state_, layout_); }
  bool done() const { return done_; }
  /// Chronic price at the current step, used by the loss reward.
  double current_price() const;

 private:
  Injections injections(int t) const;
  void disconnect_line(int line, int reconnection_steps);
  void start_maintenance();
  void refresh_maintenance_schedule();
  void decrement_timers(const GridState& before);

  std::shared_ptr<const GridSpec> spec_;
  EnvConfig config_;
  ActionLayout layout_;
  ChronicView view_;
  std::vector<Maintenance> windows_;
  GridState state_;
  PowerFlowResult flow_;
  std::mt19937_64 rng_;
  bool done_ = true;
};

}  // namespace gridrl
