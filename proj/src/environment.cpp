#include "gridrl/environment.hpp"

#include <algorithm>

namespace gridrl {

std::vector<std::string> config_violations(const EnvConfig& c) {
  std::vector<std::string> out;
  if (c.nb_timestep_overflow_allowed < 0 || c.nb_timestep_reconnection < 0 || c.nb_timestep_cooldown_line < 0 ||
      c.nb_timestep_cooldown_sub < 0 || c.max_sub_changed < 0 || c.max_line_status_changed < 0) {
    out.emplace_back("environment counts must be >= 0");
  }
  if (!(c.hard_overflow_threshold > 1.0)) out.emplace_back("hard_overflow_threshold must be > 1");
  if (c.horizon <= 0) out.emplace_back("horizon must be > 0");
  const auto& o = c.opponent;
  if (!(o.attack_probability >= 0.0 && o.attack_probability <= 1.0)) {
    out.emplace_back("attack_probability must lie in [0, 1]");
  }
  if (o.attack_duration < 0 || o.attack_cooldown < 0) out.emplace_back("opponent timers must be >= 0");
  return out;
}

double compute_reward(ActionClass prev_action, double gen_sum, double load_sum, double price) {
  if (prev_action == ActionClass::kErroneous || prev_action == ActionClass::kIllegal) return 0.0;
  const double max_loss = price * gen_sum;
  if (max_loss == 0.0) return 1.0;
  // (M*G - M*(G - L)) / (M*G): the price cancels, so it is divided out
  // symbolically and the reward does not depend on M at all.
  return std::clamp(load_sum / gen_sum, 0.0, 1.0);
}

double compute_reward(ActionClass prev_action, const PowerFlowResult& flow, double price) {
  if (flow.diverged) return 0.0;
  return compute_reward(prev_action, flow.gen_p.sum(), flow.load_served.sum(), price);
}

std::vector<AttackEvent> opponent_step(const GridSpec& spec, GridState& state, const OpponentConfig& config,
                                       std::mt19937_64& rng) {
  std::vector<AttackEvent> events;
  if (!config.enabled) return events;
  const bool active = std::any_of(state.attack_timer.begin(), state.attack_timer.end(), [](int t) { return t > 0; });
  if (active || state.opponent_cooldown > 0) return events;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (!(unit(rng) < config.attack_probability)) return events;

  std::vector<int> candidates;
  auto consider = [&](int l) {
    if (l >= 0 && l < spec.n_line() && state.line_assignment[l].conducting()) candidates.push_back(l);
  };
  if (config.attackable.empty()) {
    for (int l = 0; l < spec.n_line(); ++l) consider(l);
  } else {
    for (int l : config.attackable) consider(l);
  }
  if (candidates.empty()) return events;
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  const int line = candidates[pick(rng)];

  state.line_assignment[line] = {BusAssignment::kDisconnected, BusAssignment::kDisconnected};
  state.overflow_counter[line] = 0;
  state.attack_timer[line] = config.attack_duration;
  state.opponent_cooldown = config.attack_cooldown;
  events.push_back({line, state.step_index, config.attack_duration});
  return events;
}

Environment::Environment(std::shared_ptr<const GridSpec> spec, EnvConfig config)
    : spec_(std::move(spec)), config_(std::move(config)), layout_(layout(*spec_)) {
  const auto issues = config_violations(config_);
  if (!issues.empty()) throw ConfigurationError("invalid environment config: " + issues.front());
}

Injections Environment::injections(int t) const { return {view_.gen_p(t), view_.load_p(t)}; }

double Environment::current_price() const { return view_.price(std::min(state_.step_index, view_.horizon() - 1)); }

void Environment::reset(ChronicView view, std::uint64_t seed) {
  if (view.empty()) throw ContractViolation("reset without a chronic");
  if (view.chronic().gen_p.cols() != spec_->n_gen() || view.chronic().load_p.cols() != spec_->n_load()) {
    throw ContractViolation("chronic does not match the grid");
  }
  view_ = std::move(view);
  windows_ = view_.maintenance();
  state_ = default_state(*spec_);
  rng_.seed(seed);
  refresh_maintenance_schedule();
  flow_ = solve(*spec_, state_, injections(0));
  if (flow_.diverged || !flow_.unserved.empty() || !apply_slack_limits(*spec_, flow_)) {
    done_ = true;
    throw ScenarioInfeasibleError("initial power flow of chronic " + std::to_string(view_.chronic().id) +
                                  " at offset " + std::to_string(view_.offset()) + " is infeasible");
  }
  done_ = false;
}

void Environment::disconnect_line(int line, int reconnection_steps) {
  state_.line_assignment[line] = {BusAssignment::kDisconnected, BusAssignment::kDisconnected};
  state_.overflow_counter[line] = 0;
  state_.reconnection_timer[line] = std::max(state_.reconnection_timer[line], reconnection_steps);
}

void Environment::start_maintenance() {
  const int t = state_.step_index;
  for (const auto& w : windows_) {
    // Windows already running when the view starts begin at step 0.
    const int start = std::max(w.start, 0);
    if (start != t) continue;
    const int remaining = w.start + w.duration - t;
    state_.line_assignment[w.line] = {BusAssignment::kDisconnected, BusAssignment::kDisconnected};
    state_.overflow_counter[w.line] = 0;
    state_.maintenance_remaining[w.line] = std::max(state_.maintenance_remaining[w.line], remaining);
  }
}

void Environment::refresh_maintenance_schedule() {
  const int t = state_.step_index;
  std::fill(state_.maintenance_next.begin(), state_.maintenance_next.end(), 0);
  std::fill(state_.maintenance_duration.begin(), state_.maintenance_duration.end(), 0);
  for (const auto& w : windows_) {
    const int start = std::max(w.start, 0);
    if (start < t) continue;
    const int until = start - t;
    int& next = state_.maintenance_next[w.line];
    int& dur = state_.maintenance_duration[w.line];
    if (dur == 0 || until < next) {
      next = until;
      dur = w.start + w.duration - start;
    }
  }
}

void Environment::decrement_timers(const GridState& before) {
  // A timer started during this step keeps its full value until the next
  // one, so a cooldown of n blocks exactly n following decisions.
  auto dec = [](std::vector<int>& v, const std::vector<int>& prev) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == prev[i]) v[i] = std::max(0, v[i] - 1);
    }
  };
  dec(state_.line_cooldown, before.line_cooldown);
  dec(state_.sub_cooldown, before.sub_cooldown);
  dec(state_.reconnection_timer, before.reconnection_timer);
  dec(state_.maintenance_remaining, before.maintenance_remaining);
  dec(state_.attack_timer, before.attack_timer);
  if (state_.opponent_cooldown == before.opponent_cooldown) {
    state_.opponent_cooldown = std::max(0, state_.opponent_cooldown - 1);
  }
}

StepOutcome Environment::step(const TopoAction& action) {
  if (done_) throw ContractViolation("step called on a terminal or unreset environment");
  const GridSpec& spec = *spec_;
  StepOutcome out;

  // (1) decode and classify
  DecodedAction decoded = decode(spec, state_, layout_, action);
  out.info.action_class = decoded.action_class;
  if (decoded.action_class == ActionClass::kIllegal) {
    decoded.delta.clear();
    decoded.changed_elements.clear();
    out.info.substituted = true;
  }

  // (2) topology and cooldowns
  const GridState before = state_;
  apply_delta(state_, decoded.delta);
  for (const auto& c : decoded.delta) {
    switch (c.kind) {
      case ElementKind::kGenerator:
        state_.sub_cooldown[spec.generators[c.element].substation] = config_.nb_timestep_cooldown_sub;
        break;
      case ElementKind::kLoad:
        state_.sub_cooldown[spec.loads[c.element].substation] = config_.nb_timestep_cooldown_sub;
        break;
      case ElementKind::kLineOrigin:
      case ElementKind::kLineExtremity: {
        const int l = c.element;
        const bool status_change = before.line_assignment[l].conducting() != state_.line_assignment[l].conducting();
        if (status_change) {
          state_.line_cooldown[l] = config_.nb_timestep_cooldown_line;
          state_.overflow_counter[l] = 0;
        } else if (connected(c.before) && connected(c.after)) {
          const int sub = c.kind == ElementKind::kLineOrigin ? spec.lines[l].from : spec.lines[l].to;
          state_.sub_cooldown[sub] = config_.nb_timestep_cooldown_sub;
        }
        break;
      }
    }
  }

  // (3) opponent
  out.info.attacks = opponent_step(spec, state_, config_.opponent, rng_);

  // (4) maintenance and injections
  start_maintenance();
  const int t = state_.step_index;
  const Injections inj = injections(t);
  out.info.price = view_.price(t);

  // (5) physics
  flow_ = solve(spec, state_, inj);

  // (6) hard overflow cascade
  for (int round = 0; round < spec.n_line() && !flow_.diverged; ++round) {
    bool tripped = false;
    for (int l = 0; l < spec.n_line(); ++l) {
      if (state_.line_assignment[l].conducting() && flow_.rho(l) >= config_.hard_overflow_threshold) {
        disconnect_line(l, config_.nb_timestep_reconnection);
        out.info.overflow_disconnections.push_back(l);
        tripped = true;
      }
    }
    if (!tripped) break;
    flow_ = solve(spec, state_, inj);
  }

  // (7) soft overflow
  if (!flow_.diverged) {
    bool tripped = false;
    for (int l = 0; l < spec.n_line(); ++l) {
      if (!state_.line_assignment[l].conducting()) {
        state_.overflow_counter[l] = 0;
        continue;
      }
      state_.overflow_counter[l] = flow_.rho(l) > 1.0 ? state_.overflow_counter[l] + 1 : 0;
      if (state_.overflow_counter[l] > config_.nb_timestep_overflow_allowed) {
        disconnect_line(l, config_.nb_timestep_reconnection);
        out.info.overflow_disconnections.push_back(l);
        tripped = true;
      }
    }
    if (tripped) flow_ = solve(spec, state_, inj);
  }

  // (8) terminal checks
  if (flow_.diverged) {
    out.terminated = true;
    if (out.info.action_class == ActionClass::kLegal) out.info.action_class = ActionClass::kErroneous;
  } else if (!flow_.unserved.empty() || !apply_slack_limits(spec, flow_)) {
    out.terminated = true;
  } else if (t + 1 >= view_.horizon()) {
    out.truncated = true;
  }

  // (9) reward
  out.info.gen_sum = flow_.diverged ? 0.0 : flow_.gen_p.sum();
  out.info.load_sum = flow_.diverged ? 0.0 : flow_.load_served.sum();
  out.reward = compute_reward(out.info.action_class, flow_, out.info.price);
  out.info.rho = flow_.rho;
  out.info.total_loss = flow_.total_loss;
  out.info.slack_p = flow_.slack_p;

  // (10) timers
  decrement_timers(before);
  state_.step_index = t + 1;
  refresh_maintenance_schedule();
  done_ = out.terminated || out.truncated;
  return out;
}

}  // namespace gridrl
