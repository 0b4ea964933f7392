#pragma once

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <random>
#include <vector>

#include "gridrl/action_space.hpp"
#include "gridrl/chronics.hpp"
#include "gridrl/environment.hpp"
#include "gridrl/fixtures.hpp"
#include "gridrl/grid_model.hpp"
#include "gridrl/powerflow.hpp"

namespace gridrl::testing {

inline std::shared_ptr<const GridSpec> fixture_spec() {
  static const auto spec = std::make_shared<const GridSpec>(case5_grid());
  return spec;
}

/// In-memory copy of the bundled chronics, keyed by id.
inline const std::map<int, std::shared_ptr<const Chronic>>& fixture_chronics() {
  static const auto chronics = [] {
    std::map<int, std::shared_ptr<const Chronic>> out;
    for (auto& c : case5_chronics(*fixture_spec())) {
      const int id = c.id;
      out[id] = std::make_shared<const Chronic>(std::move(c));
    }
    return out;
  }();
  return chronics;
}

inline BusAssignment random_bus(std::mt19937_64& rng, double p_disconnected) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < p_disconnected) return BusAssignment::kDisconnected;
  return u(rng) < 0.5 ? BusAssignment::kBusbar1 : BusAssignment::kBusbar2;
}

inline GridState random_topology(const GridSpec& spec, std::mt19937_64& rng, double p_disconnected = 0.15) {
  GridState s = default_state(spec);
  for (auto& b : s.gen_assignment) b = random_bus(rng, p_disconnected);
  for (auto& b : s.load_assignment) b = random_bus(rng, p_disconnected);
  for (auto& l : s.line_assignment) l = {random_bus(rng, p_disconnected), random_bus(rng, p_disconnected)};
  return s;
}

/// Uniform draw from each element's masked support.
inline TopoAction random_supported_action(const ActionLayout& lay, const ActionMask& mask, std::mt19937_64& rng) {
  const auto support = masked_sample_support(lay, mask);
  std::vector<int> choices(lay.n_elements());
  for (int e = 0; e < lay.n_elements(); ++e) {
    std::uniform_int_distribution<std::size_t> pick(0, support[e].size() - 1);
    choices[e] = support[e][pick(rng)];
  }
  return TopoAction(lay, choices);
}

/// Same as above but each element only deviates from do-nothing with
/// probability p_act, which keeps random episodes alive longer.
inline TopoAction sparse_supported_action(const ActionLayout& lay, const ActionMask& mask, std::mt19937_64& rng,
                                          double p_act) {
  const auto support = masked_sample_support(lay, mask);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> choices = lay.do_nothing;
  for (int e = 0; e < lay.n_elements(); ++e) {
    if (u(rng) >= p_act) continue;
    std::uniform_int_distribution<std::size_t> pick(0, support[e].size() - 1);
    choices[e] = support[e][pick(rng)];
  }
  return TopoAction(lay, choices);
}

inline EnvConfig short_config(int horizon = 288) {
  EnvConfig c;
  c.horizon = horizon;
  return c;
}

/// Flows of one lossless DC solve computed with the full (singular)
/// Laplacian and a least-squares pseudo-inverse. Net injections must
/// already be balanced per island.
inline Eigen::VectorXd oracle_dc_flows(int n_nodes, const std::vector<std::pair<int, int>>& ends,
                                       const std::vector<double>& reactance, const Eigen::VectorXd& injection_pu) {
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
  for (std::size_t k = 0; k < ends.size(); ++k) {
    const auto [i, j] = ends[k];
    if (i == j) continue;
    const double y = 1.0 / reactance[k];
    lap(i, i) += y;
    lap(j, j) += y;
    lap(i, j) -= y;
    lap(j, i) -= y;
  }
  const Eigen::VectorXd theta = lap.completeOrthogonalDecomposition().solve(injection_pu);
  Eigen::VectorXd f(static_cast<Eigen::Index>(ends.size()));
  for (std::size_t k = 0; k < ends.size(); ++k) {
    f(static_cast<Eigen::Index>(k)) = (theta(ends[k].first) - theta(ends[k].second)) / reactance[k];
  }
  return f;
}

}  // namespace gridrl::testing
