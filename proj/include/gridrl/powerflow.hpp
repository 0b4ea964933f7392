#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "gridrl/grid_model.hpp"

namespace gridrl {

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scheduled injections in MW. The slack entries of gen_p are replaced by
/// the balancing output during the solve.
struct Injections {
  Eigen::VectorXd gen_p;
  Eigen::VectorXd load_p;
};

struct PowerFlowResult {
  std::vector<ElectricalNode> nodes;  // live nodes, same order as electrical_nodes()
  Eigen::VectorXd node_angle;         // radians, per entry of `nodes`
  Eigen::VectorXd line_flow;          // MW, origin -> extremity positive
  Eigen::VectorXd rho;                // |flow| / thermal_limit
  Eigen::VectorXd line_loss;          // MW
  Eigen::VectorXd gen_p;              // actual output after balancing, 0 when disconnected
  Eigen::VectorXd load_served;        // demand of served loads, 0 when unserved or disconnected
  std::vector<int> island_slack;      // generator acting as slack, one per island holding generators
  double total_loss = 0.0;
  double slack_p = 0.0;  // output of the designated slack generator
  std::vector<int> unserved;  // loads in islands without any generator
  bool diverged = false;

  /// Index into `nodes`, or -1 when (substation, bus) is not live.
  int node_index(int substation, BusAssignment bus) const;
};

/// DC power flow per island with a quadratic loss correction: the
/// lossless solve yields flows, line losses r*f^2 (p.u.) are added as
/// half-and-half withdrawals at both line ends, and the system is solved
/// once more with the slack covering those losses.
PowerFlowResult solve(const GridSpec& spec, const GridState& state, const Injections& inj);

/// True when every island slack output sits within its generator's
/// [p_min, p_max] up to 1e-6 MW.
bool apply_slack_limits(const GridSpec& spec, const PowerFlowResult& result);

inline constexpr double kSlackTolerance = 1e-6;

}  // namespace gridrl
