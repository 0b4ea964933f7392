#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridrl/environment.hpp"
#include "gridrl/metrics.hpp"
#include "gridrl/nn/distribution.hpp"
#include "gridrl/nn/policy.hpp"
#include "gridrl/traces.hpp"

namespace gridrl {

struct PPOConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  int epochs = 4;
  int minibatch_size = 64;
  int rollout_length = 128;
  int workers = 4;
  std::int64_t total_steps = 200000;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  std::int64_t eval_interval = 10000;
};

std::vector<std::string> ppo_config_violations(const PPOConfig& c);

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// dones[t] marks that the episode ended after step t; the value after a
/// done step is taken as 0. last_value bootstraps past the final step.
GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values, const std::vector<bool>& dones,
                      double last_value, double gamma, double lambda);

struct Transition {
  nn::EncodedObs obs;
  std::vector<int> action;
  ActionMask mask;
  double log_prob = 0.0;
  double value = 0.0;
  /// Environment reward; on truncation gamma * V(final obs) is folded in.
  double reward = 0.0;
  bool done = false;
};

struct EpisodeSummary {
  int chronic_id = 0;
  int length = 0;
  double reward_sum = 0.0;
};

/// Worker-major storage: transition t of worker w sits at w * length + t.
struct RolloutBuffer {
  int workers = 0;
  int length = 0;
  std::vector<Transition> steps;
  std::vector<double> last_values;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  Eigen::VectorXd td_targets;
  std::vector<EpisodeSummary> finished;

  std::size_t size() const { return steps.size(); }
  /// Fills advantages, returns and the frozen one-step value targets.
  void finalize(double gamma, double lambda);
};

struct Minibatch {
  std::vector<const nn::EncodedObs*> obs;
  std::vector<std::vector<int>> actions;
  nn::Matrix mask;
  Eigen::VectorXd old_log_prob;
  Eigen::VectorXd advantages;
  Eigen::VectorXd td_targets;
};

Minibatch make_minibatch(const RolloutBuffer& buffer, const std::vector<int>& indices, bool normalize_advantages);

struct PPOLosses {
  nn::Tensor clip;       // E[min(t1, t2)]
  nn::Tensor value;      // E[(target - V)^2]
  nn::Tensor entropy;    // mean factorized entropy
  nn::Tensor objective;  // clip - c1 value + c2 entropy, maximized
  nn::Tensor loss;       // -objective
};

PPOLosses ppo_losses(const Minibatch& batch, const nn::PolicyNetwork& policy, const PPOConfig& config);

/// One environment plus its own random stream and episode bookkeeping.
class RolloutWorker {
 public:
  RolloutWorker(std::shared_ptr<const GridSpec> spec, const EnvConfig& env_config,
                std::map<int, std::shared_ptr<const Chronic>> chronics, std::vector<int> train_ids,
                nn::EncoderKind encoder, std::uint64_t seed);

  Environment& env() { return env_; }
  const nn::EncodedObs& observation() const { return obs_; }
  std::mt19937_64& rng() { return rng_; }
  /// Starts a new episode on a freshly sampled feasible scenario.
  void start_episode();
  void refresh_observation();

  double episode_reward = 0.0;
  int episode_length = 0;

 private:
  Environment env_;
  std::map<int, std::shared_ptr<const Chronic>> chronics_;
  std::vector<int> train_ids_;
  nn::EncoderKind encoder_;
  std::mt19937_64 rng_;
  nn::EncodedObs obs_;
};

/// Steps every worker config.rollout_length times with actions sampled
/// from policy. Workers run on their own threads when config.workers > 1.
RolloutBuffer collect_rollouts(std::vector<RolloutWorker>& workers, const nn::PolicyNetwork& policy,
                               const PPOConfig& config);

/// Argmax per element, restricted to the mask; ties go to the lowest index.
PolicyFn greedy_policy(const nn::PolicyNetwork& policy);

struct EvalRecord {
  std::int64_t step = 0;
  int chronic = 0;
  bool opponent = false;
  int episode_length = 0;
  int chronic_length = 0;
  double reward_sum = 0.0;
  double loss_clip = 0.0;
  double loss_value = 0.0;
  double entropy = 0.0;
};

struct UpdateRecord {
  std::int64_t step = 0;
  double mean_episode_reward = 0.0;  // NaN when no episode finished
  int episodes = 0;
  double loss_clip = 0.0;
  double loss_value = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
};

struct SelectionRecord {
  std::int64_t step = 0;
  std::int64_t survived = 0;  // summed episode lengths over select_ids
  double reward_sum = 0.0;
  bool best = false;
};

struct TrainSetup {
  std::shared_ptr<const GridSpec> spec;
  std::map<int, std::shared_ptr<const Chronic>> chronics;
  std::vector<int> train_ids;
  std::vector<int> eval_ids;
  EnvConfig env;
  PPOConfig ppo;
  bool train_opponent = false;
  std::uint64_t seed = 0;
  std::int64_t start_step = 0;
  /// Training chronics replayed greedily (opponent off) at each evaluation
  /// point to pick the best checkpoint. Empty disables selection.
  std::vector<int> select_ids;
  /// Empty: nothing is written to disk.
  std::filesystem::path out_dir;
  /// Called after every update; returning false stops training early.
  std::function<bool(const UpdateRecord&)> on_update;
};

struct TrainResult {
  std::int64_t steps = 0;
  EvalHistory history;
  std::vector<EvalRecord> eval_log;
  std::vector<UpdateRecord> updates;
  std::vector<SelectionRecord> selection;
  /// Parameters of the best selection point; empty without selection.
  Eigen::VectorXd best_parameters;
  std::int64_t best_step = -1;
  bool diverged = false;
  std::string message;
};

/// Deterministic evaluation seed of a chronic and opponent mode.
std::uint64_t eval_seed(std::uint64_t run_seed, int chronic, bool opponent);

/// Full-chronic greedy episode.
EpisodeTrace evaluate_episode(const nn::PolicyNetwork& policy, std::shared_ptr<const GridSpec> spec,
                              EnvConfig env_config, std::shared_ptr<const Chronic> chronic, bool opponent,
                              std::uint64_t seed);

TrainResult train(const TrainSetup& setup, nn::PolicyNetwork& policy);

std::string to_json_line(const EvalRecord& r);
std::string to_json_line(const UpdateRecord& r);
std::string to_json_line(const SelectionRecord& r);

}  // namespace gridrl
