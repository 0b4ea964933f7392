#include "gridrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "gridrl/nn/checkpoint.hpp"
#include "json.hpp"

namespace gridrl {

using nn::Matrix;
using nn::Tensor;

std::vector<std::string> ppo_config_violations(const PPOConfig& c) {
  std::vector<std::string> out;
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) out.emplace_back("gamma must lie in (0, 1]");
  if (!(c.lambda > 0.0 && c.lambda <= 1.0)) out.emplace_back("lambda must lie in (0, 1]");
  if (!(c.clip_epsilon > 0.0)) out.emplace_back("clip_epsilon must be > 0");
  if (!(c.entropy_coef >= 0.0)) out.emplace_back("entropy_coef must be >= 0");
  if (!(c.value_coef >= 0.0)) out.emplace_back("value_coef must be >= 0");
  if (c.epochs < 0) out.emplace_back("epochs must be >= 0");
  if (c.minibatch_size <= 0) out.emplace_back("minibatch_size must be > 0");
  if (c.rollout_length <= 0) out.emplace_back("rollout_length must be > 0");
  if (c.workers <= 0) out.emplace_back("workers must be > 0");
  if (c.total_steps < 0) out.emplace_back("total_steps must be >= 0");
  if (!(c.learning_rate > 0.0)) out.emplace_back("learning_rate must be > 0");
  if (!(c.max_grad_norm > 0.0)) out.emplace_back("max_grad_norm must be > 0");
  if (c.eval_interval <= 0) out.emplace_back("eval_interval must be > 0");
  return out;
}

GaeResult compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values, const std::vector<bool>& dones,
                      double last_value, double gamma, double lambda) {
  const Eigen::Index n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
    throw nn::ContractError("compute_gae: rewards, values and dones must have equal length");
  }
  GaeResult r;
  r.advantages = Eigen::VectorXd::Zero(n);
  double gae = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double next_value = t == n - 1 ? last_value : values(t + 1);
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards(t) + gamma * next_value * live - values(t);
    gae = delta + gamma * lambda * live * gae;
    r.advantages(t) = gae;
  }
  r.returns = r.advantages + values;
  return r;
}

void RolloutBuffer::finalize(double gamma, double lambda) {
  const auto n = static_cast<Eigen::Index>(steps.size());
  advantages.resize(n);
  returns.resize(n);
  td_targets.resize(n);
  for (int w = 0; w < workers; ++w) {
    const Eigen::Index base = static_cast<Eigen::Index>(w) * length;
    Eigen::VectorXd r(length);
    Eigen::VectorXd v(length);
    std::vector<bool> d(length);
    for (int t = 0; t < length; ++t) {
      const auto& tr = steps[base + t];
      r(t) = tr.reward;
      v(t) = tr.value;
      d[t] = tr.done;
    }
    const GaeResult g = compute_gae(r, v, d, last_values[w], gamma, lambda);
    advantages.segment(base, length) = g.advantages;
    returns.segment(base, length) = g.returns;
    for (int t = 0; t < length; ++t) {
      const double next_value = t == length - 1 ? last_values[w] : v(t + 1);
      td_targets(base + t) = r(t) + (d[t] ? 0.0 : gamma * next_value);
    }
  }
  if (!advantages.allFinite()) throw DivergenceError("non-finite advantages");
}

Minibatch make_minibatch(const RolloutBuffer& buffer, const std::vector<int>& indices, bool normalize_advantages) {
  Minibatch mb;
  const auto n = static_cast<Eigen::Index>(indices.size());
  mb.old_log_prob.resize(n);
  mb.advantages.resize(n);
  mb.td_targets.resize(n);
  std::vector<const ActionMask*> masks;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& tr = buffer.steps[indices[i]];
    mb.obs.push_back(&tr.obs);
    mb.actions.push_back(tr.action);
    masks.push_back(&tr.mask);
    mb.old_log_prob(i) = tr.log_prob;
    mb.advantages(i) = buffer.advantages(indices[i]);
    mb.td_targets(i) = buffer.td_targets(indices[i]);
  }
  mb.mask = nn::mask_matrix(masks);
  if (normalize_advantages && n > 1) {
    const double mean = mb.advantages.mean();
    const double var = (mb.advantages.array() - mean).square().sum() / static_cast<double>(n - 1);
    mb.advantages = (mb.advantages.array() - mean) / (std::sqrt(var) + 1e-8);
  }
  return mb;
}

PPOLosses ppo_losses(const Minibatch& batch, const nn::PolicyNetwork& policy, const PPOConfig& config) {
  const auto n = static_cast<Eigen::Index>(batch.obs.size());
  if (n == 0) throw nn::ContractError("empty minibatch");
  const nn::PolicyOutput out = policy.forward(batch.obs);
  const nn::MaskedCategoricalSet dist(out.logits, batch.mask, policy.layout());
  const Tensor log_prob = dist.log_prob(batch.actions);
  const Tensor ratio = nn::exp(log_prob - Tensor(Matrix(batch.old_log_prob)));
  if (!ratio.value().allFinite()) {
    Eigen::Index bad = 0;
    for (; bad < n && std::isfinite(ratio.value()(bad, 0)); ++bad) {
    }
    throw DivergenceError("non-finite probability ratio at minibatch row " + std::to_string(bad) +
                          " (new log_prob " + std::to_string(log_prob.value()(bad, 0)) + ", old " +
                          std::to_string(batch.old_log_prob(bad)) + ")");
  }
  const Tensor adv(Matrix(batch.advantages));
  const Tensor t1 = ratio * adv;
  const Tensor t2 = nn::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon) * adv;

  PPOLosses l;
  l.clip = nn::mean(nn::minimum(t1, t2));
  l.value = nn::mean(nn::square(Tensor(Matrix(batch.td_targets)) - out.value));
  l.entropy = nn::mean(dist.entropy());
  l.objective = l.clip - nn::scale(l.value, config.value_coef) + nn::scale(l.entropy, config.entropy_coef);
  l.loss = nn::scale(l.objective, -1.0);
  return l;
}

RolloutWorker::RolloutWorker(std::shared_ptr<const GridSpec> spec, const EnvConfig& env_config,
                             std::map<int, std::shared_ptr<const Chronic>> chronics, std::vector<int> train_ids,
                             nn::EncoderKind encoder, std::uint64_t seed)
    : env_(std::move(spec), env_config),
      chronics_(std::move(chronics)),
      train_ids_(std::move(train_ids)),
      encoder_(encoder),
      rng_(seed) {
  if (train_ids_.empty()) throw ConfigurationError("no training chronics");
  for (int id : train_ids_) {
    if (!chronics_.count(id)) throw ConfigurationError("training chronic " + std::to_string(id) + " is not loaded");
  }
}

void RolloutWorker::start_episode() {
  constexpr int kAttempts = 1000;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const Scenario s = sample_scenario(rng_, train_ids_, env_.config().horizon);
    const std::uint64_t env_seed = rng_();
    try {
      env_.reset(slice(chronics_.at(s.chronic_id), s), env_seed);
    } catch (const ScenarioInfeasibleError&) {
      continue;
    }
    episode_reward = 0.0;
    episode_length = 0;
    refresh_observation();
    return;
  }
  throw ConfigurationError("could not sample a feasible training scenario");
}

void RolloutWorker::refresh_observation() { obs_ = nn::featurize(encoder_, env_.spec(), env_.state(), env_.flow()); }

namespace {

struct WorkerRollout {
  std::vector<Transition> steps;
  std::vector<EpisodeSummary> finished;
  double last_value = 0.0;
};

double value_of(const nn::PolicyNetwork& policy, const nn::EncodedObs& obs) {
  return policy.forward({&obs}).value.item();
}

WorkerRollout run_worker(RolloutWorker& worker, const nn::PolicyNetwork& policy, const PPOConfig& config) {
  const nn::NoGradGuard no_grad;
  const ActionLayout& lay = policy.layout();
  WorkerRollout out;
  out.steps.reserve(config.rollout_length);
  for (int t = 0; t < config.rollout_length; ++t) {
    Transition tr;
    tr.obs = worker.observation();
    tr.mask = worker.env().mask();
    const nn::PolicyOutput po = policy.forward({&tr.obs});
    const nn::MaskedCategoricalSet dist(po.logits, nn::mask_matrix({&tr.mask}), lay);
    tr.action = dist.sample(0, worker.rng());
    tr.log_prob = dist.log_prob({tr.action}).item();
    tr.value = po.value.item();

    const StepOutcome o = worker.env().step(TopoAction(lay, tr.action));
    if (o.info.action_class != ActionClass::kLegal && o.info.action_class != ActionClass::kErroneous) {
      throw ContractViolation("masked sample classified as " + to_string(o.info.action_class));
    }
    tr.reward = o.reward;
    tr.done = o.terminated || o.truncated;
    worker.episode_reward += o.reward;
    ++worker.episode_length;
    if (tr.done) {
      if (o.truncated && !o.terminated) {
        worker.refresh_observation();
        tr.reward += config.gamma * value_of(policy, worker.observation());
      }
      out.finished.push_back({worker.env().chronic().chronic().id, worker.episode_length, worker.episode_reward});
      worker.start_episode();
    } else {
      worker.refresh_observation();
    }
    out.steps.push_back(std::move(tr));
  }
  out.last_value = value_of(policy, worker.observation());
  return out;
}

}  // namespace

RolloutBuffer collect_rollouts(std::vector<RolloutWorker>& workers, const nn::PolicyNetwork& policy,
                               const PPOConfig& config) {
  if (workers.empty()) throw ConfigurationError("collect_rollouts needs at least one worker");
  std::vector<WorkerRollout> parts(workers.size());
  if (workers.size() == 1) {
    parts[0] = run_worker(workers[0], policy, config);
  } else {
    std::vector<std::exception_ptr> errors(workers.size());
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers.size(); ++w) {
      threads.emplace_back([&, w] {
        try {
          parts[w] = run_worker(workers[w], policy, config);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  RolloutBuffer buf;
  buf.workers = static_cast<int>(workers.size());
  buf.length = config.rollout_length;
  for (auto& p : parts) {
    for (auto& tr : p.steps) buf.steps.push_back(std::move(tr));
    buf.finished.insert(buf.finished.end(), p.finished.begin(), p.finished.end());
    buf.last_values.push_back(p.last_value);
  }
  return buf;
}

PolicyFn greedy_policy(const nn::PolicyNetwork& policy) {
  return [&policy](const Environment& env) {
    const nn::NoGradGuard no_grad;
    const nn::EncodedObs obs = nn::featurize(policy.kind(), env.spec(), env.state(), env.flow());
    const ActionMask mask = env.mask();
    const nn::PolicyOutput po = policy.forward({&obs});
    const nn::MaskedCategoricalSet dist(po.logits, nn::mask_matrix({&mask}), policy.layout());
    return TopoAction(policy.layout(), dist.argmax(0));
  };
}

std::uint64_t eval_seed(std::uint64_t run_seed, int chronic, bool opponent) {
  std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                    static_cast<std::uint32_t>(chronic), static_cast<std::uint32_t>(opponent ? 1 : 0)};
  std::mt19937_64 rng(seq);
  return rng();
}

EpisodeTrace evaluate_episode(const nn::PolicyNetwork& policy, std::shared_ptr<const GridSpec> spec,
                              EnvConfig env_config, std::shared_ptr<const Chronic> chronic, bool opponent,
                              std::uint64_t seed) {
  env_config.opponent.enabled = opponent;
  Environment env(std::move(spec), env_config);
  return run_episode(env, full_view(std::move(chronic)), seed, greedy_policy(policy));
}

std::string to_json_line(const SelectionRecord& r) {
  const nlohmann::json j = {{"step", r.step}, {"survived", r.survived}, {"reward_sum", r.reward_sum}, {"best", r.best}};
  return j.dump();
}

std::string to_json_line(const EvalRecord& r) {
  const nlohmann::json j = {{"step", r.step},
                            {"chronic", r.chronic},
                            {"opponent", r.opponent},
                            {"episode_length", r.episode_length},
                            {"chronic_length", r.chronic_length},
                            {"reward_sum", r.reward_sum},
                            {"loss_clip", r.loss_clip},
                            {"loss_value", r.loss_value},
                            {"entropy", r.entropy}};
  return j.dump();
}

std::string to_json_line(const UpdateRecord& r) {
  nlohmann::json j = {{"step", r.step},
                      {"episodes", r.episodes},
                      {"loss_clip", r.loss_clip},
                      {"loss_value", r.loss_value},
                      {"entropy", r.entropy},
                      {"grad_norm", r.grad_norm}};
  j["mean_episode_reward"] = std::isfinite(r.mean_episode_reward) ? nlohmann::json(r.mean_episode_reward) : nullptr;
  return j.dump();
}

namespace {

class RunFiles {
 public:
  RunFiles(const std::filesystem::path& dir, bool append) : dir_(dir) {
    if (dir_.empty()) return;
    std::filesystem::create_directories(dir_ / "checkpoints");
    const auto mode = append ? std::ios::app : std::ios::trunc;
    train_.open(dir_ / "train_log.jsonl", std::ios::out | mode);
    eval_.open(dir_ / "eval_log.jsonl", std::ios::out | mode);
    select_.open(dir_ / "selection_log.jsonl", std::ios::out | mode);
    if (!train_ || !eval_ || !select_) throw std::runtime_error("cannot open logs under " + dir_.string());
  }

  void log(const UpdateRecord& r) {
    if (train_.is_open()) train_ << to_json_line(r) << "\n" << std::flush;
  }
  void log(const EvalRecord& r) {
    if (eval_.is_open()) eval_ << to_json_line(r) << "\n" << std::flush;
  }
  void log(const SelectionRecord& r) {
    if (select_.is_open()) select_ << to_json_line(r) << "\n" << std::flush;
  }
  void best(const nn::PolicyNetwork& policy, std::int64_t step) {
    if (!dir_.empty()) nn::save_checkpoint(dir_ / "best.bin", policy, step);
  }
  void checkpoint(const nn::PolicyNetwork& policy, std::int64_t step) {
    if (dir_.empty()) return;
    nn::save_checkpoint(dir_ / "checkpoints" / ("step_" + std::to_string(step) + ".bin"), policy, step);
    nn::save_checkpoint(dir_ / "latest.bin", policy, step);
  }

 private:
  std::filesystem::path dir_;
  std::ofstream train_;
  std::ofstream eval_;
  std::ofstream select_;
};

}  // namespace

TrainResult train(const TrainSetup& setup, nn::PolicyNetwork& policy) {
  const PPOConfig& cfg = setup.ppo;
  if (const auto issues = ppo_config_violations(cfg); !issues.empty()) {
    throw ConfigurationError("invalid PPO config: " + issues.front());
  }
  if (!setup.spec) throw ConfigurationError("train without a grid");

  EnvConfig env_config = setup.env;
  env_config.opponent.enabled = setup.train_opponent;
  std::map<int, std::shared_ptr<const Chronic>> train_chronics;
  for (int id : setup.train_ids) {
    const auto it = setup.chronics.find(id);
    if (it == setup.chronics.end()) throw ConfigurationError("training chronic " + std::to_string(id) + " not loaded");
    train_chronics.emplace(id, it->second);
  }
  std::vector<RolloutWorker> workers;
  for (int w = 0; w < cfg.workers; ++w) {
    std::seed_seq seq{static_cast<std::uint32_t>(setup.seed), static_cast<std::uint32_t>(setup.seed >> 32),
                      static_cast<std::uint32_t>(w), 0x5eedu};
    std::mt19937_64 seeder(seq);
    workers.emplace_back(setup.spec, env_config, train_chronics, setup.train_ids, policy.kind(), seeder());
    workers.back().start_episode();
  }

  TrainResult result;
  result.steps = setup.start_step;
  result.history.total_steps = cfg.total_steps;
  for (int id : setup.eval_ids) {
    const auto it = setup.chronics.find(id);
    if (it == setup.chronics.end()) throw ConfigurationError("evaluation chronic " + std::to_string(id) + " not loaded");
    result.history.chronic_length[id] = it->second->length();
  }

  RunFiles files(setup.out_dir, setup.start_step > 0);
  const auto params = policy.parameters();
  nn::Adam adam(params, cfg.learning_rate);
  std::mt19937_64 shuffle_rng(setup.seed ^ 0xa5a5a5a5deadbeefULL);
  std::int64_t next_eval = (setup.start_step / cfg.eval_interval + 1) * cfg.eval_interval;
  double last_clip = 0.0;
  double last_value = 0.0;
  double last_entropy = 0.0;
  std::int64_t best_survived = 0;
  double best_reward = 0.0;
  for (int id : setup.select_ids) {
    if (!train_chronics.count(id)) {
      throw ConfigurationError("selection chronic " + std::to_string(id) + " is not a training chronic");
    }
  }

  auto run_eval = [&](std::int64_t step) {
    for (int id : setup.eval_ids) {
      for (bool opponent : {false, true}) {
        const EpisodeTrace trace = evaluate_episode(policy, setup.spec, setup.env, setup.chronics.at(id), opponent,
                                                    eval_seed(setup.seed, id, opponent));
        EvalRecord r{step,
                     id,
                     opponent,
                     trace.episode_length(),
                     result.history.chronic_length.at(id),
                     trace.reward_sum(),
                     last_clip,
                     last_value,
                     last_entropy};
        files.log(r);
        result.eval_log.push_back(r);
        if (!opponent) result.history.record(id, step, r.episode_length);
      }
    }
    files.checkpoint(policy, step);

    if (setup.select_ids.empty()) return;
    SelectionRecord sel;
    sel.step = step;
    for (int id : setup.select_ids) {
      const EpisodeTrace trace = evaluate_episode(policy, setup.spec, setup.env, setup.chronics.at(id), false,
                                                  eval_seed(setup.seed, id, false));
      sel.survived += trace.episode_length();
      sel.reward_sum += trace.reward_sum();
    }
    sel.best = result.best_step < 0 || sel.survived > best_survived ||
               (sel.survived == best_survived && sel.reward_sum > best_reward);
    if (sel.best) {
      best_survived = sel.survived;
      best_reward = sel.reward_sum;
      result.best_step = step;
      result.best_parameters = policy.flat_parameters();
      files.best(policy, step);
    }
    files.log(sel);
    result.selection.push_back(sel);
  };

  while (result.steps < cfg.total_steps) {
    RolloutBuffer buffer = collect_rollouts(workers, policy, cfg);
    result.steps += static_cast<std::int64_t>(buffer.size());
    UpdateRecord rec;
    rec.step = result.steps;
    rec.episodes = static_cast<int>(buffer.finished.size());
    rec.mean_episode_reward = std::numeric_limits<double>::quiet_NaN();
    if (!buffer.finished.empty()) {
      double s = 0.0;
      for (const auto& e : buffer.finished) s += e.reward_sum;
      rec.mean_episode_reward = s / static_cast<double>(buffer.finished.size());
    }

    try {
      buffer.finalize(cfg.gamma, cfg.lambda);
      std::vector<int> order(buffer.size());
      std::iota(order.begin(), order.end(), 0);
      double clip_sum = 0.0;
      double value_sum = 0.0;
      double entropy_sum = 0.0;
      double norm_sum = 0.0;
      int batches = 0;
      for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.minibatch_size) {
          const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch_size));
          const std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
          const Minibatch mb = make_minibatch(buffer, idx, cfg.normalize_advantages);
          const PPOLosses losses = ppo_losses(mb, policy, cfg);
          if (!std::isfinite(losses.loss.item())) throw DivergenceError("non-finite PPO loss");
          adam.zero_grad();
          nn::backward(losses.loss);
          const double norm = nn::clip_grad_norm(params, cfg.max_grad_norm);
          if (!std::isfinite(norm)) throw DivergenceError("non-finite gradient norm");
          adam.step();
          clip_sum += losses.clip.item();
          value_sum += losses.value.item();
          entropy_sum += losses.entropy.item();
          norm_sum += norm;
          ++batches;
        }
      }
      if (batches > 0) {
        last_clip = clip_sum / batches;
        last_value = value_sum / batches;
        last_entropy = entropy_sum / batches;
        rec.grad_norm = norm_sum / batches;
      }
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.message = e.what();
      files.checkpoint(policy, result.steps);
      break;
    }
    rec.loss_clip = last_clip;
    rec.loss_value = last_value;
    rec.entropy = last_entropy;
    files.log(rec);
    result.updates.push_back(rec);

    if (result.steps >= next_eval || result.steps >= cfg.total_steps) {
      run_eval(result.steps);
      while (next_eval <= result.steps) next_eval += cfg.eval_interval;
    }
    if (setup.on_update && !setup.on_update(rec)) break;
  }
  return result;
}

}  // namespace gridrl
