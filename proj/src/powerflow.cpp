#include "gridrl/powerflow.hpp"

#include <algorithm>
#include <cmath>

namespace gridrl {

namespace {

Eigen::Index reduced(int local, int slack_local) { return local < slack_local ? local : local - 1; }

}  // namespace

int PowerFlowResult::node_index(int substation, BusAssignment bus) const {
  const ElectricalNode probe{substation, bus};
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), probe);
  if (it == nodes.end() || !(*it == probe)) return -1;
  return static_cast<int>(it - nodes.begin());
}

PowerFlowResult solve(const GridSpec& spec, const GridState& state, const Injections& inj) {
  check_consistent(spec, state);
  if (inj.gen_p.size() != spec.n_gen() || inj.load_p.size() != spec.n_load()) {
    throw ArgumentError("injection vector sizes do not match the grid");
  }
  if (!inj.gen_p.allFinite() || !inj.load_p.allFinite()) throw ArgumentError("non-finite injection");

  const double base = spec.base_power;
  PowerFlowResult res;
  res.line_flow = Eigen::VectorXd::Zero(spec.n_line());
  res.rho = Eigen::VectorXd::Zero(spec.n_line());
  res.line_loss = Eigen::VectorXd::Zero(spec.n_line());
  res.gen_p = Eigen::VectorXd::Zero(spec.n_gen());
  res.load_served = Eigen::VectorXd::Zero(spec.n_load());

  const auto parts = islands(spec, state);
  for (const auto& part : parts) res.nodes.insert(res.nodes.end(), part.begin(), part.end());
  std::sort(res.nodes.begin(), res.nodes.end());
  res.node_angle = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(res.nodes.size()));

  std::vector<int> island_of(res.nodes.size(), -1);
  std::vector<int> local_of(res.nodes.size(), -1);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t j = 0; j < parts[k].size(); ++j) {
      const int n = res.node_index(parts[k][j].substation, parts[k][j].bus);
      island_of[n] = static_cast<int>(k);
      local_of[n] = static_cast<int>(j);
    }
  }

  auto gen_node = [&](int g) { return res.node_index(spec.generators[g].substation, state.gen_assignment[g]); };
  auto load_node = [&](int d) { return res.node_index(spec.loads[d].substation, state.load_assignment[d]); };
  auto line_nodes = [&](int l) {
    const auto& a = state.line_assignment[l];
    return std::pair{res.node_index(spec.lines[l].from, a.origin), res.node_index(spec.lines[l].to, a.extremity)};
  };

  for (std::size_t k = 0; k < parts.size(); ++k) {
    const int island = static_cast<int>(k);
    const auto size = static_cast<Eigen::Index>(parts[k].size());

    std::vector<int> gens, loads, lines;
    for (int g = 0; g < spec.n_gen(); ++g) {
      if (connected(state.gen_assignment[g]) && island_of[gen_node(g)] == island) gens.push_back(g);
    }
    for (int d = 0; d < spec.n_load(); ++d) {
      if (connected(state.load_assignment[d]) && island_of[load_node(d)] == island) loads.push_back(d);
    }
    for (int l = 0; l < spec.n_line(); ++l) {
      if (state.line_assignment[l].conducting() && island_of[line_nodes(l).first] == island) lines.push_back(l);
    }

    if (gens.empty()) {
      res.unserved.insert(res.unserved.end(), loads.begin(), loads.end());
      continue;
    }
    for (int d : loads) res.load_served(d) = inj.load_p(d);

    const int slack = std::find(gens.begin(), gens.end(), spec.slack) != gens.end() ? spec.slack : gens.front();
    res.island_slack.push_back(slack);
    const int slack_local = local_of[gen_node(slack)];

    // Net scheduled injection per local node, MW, slack excluded.
    Eigen::VectorXd p = Eigen::VectorXd::Zero(size);
    double scheduled = 0.0;
    for (int g : gens) {
      if (g == slack) continue;
      p(local_of[gen_node(g)]) += inj.gen_p(g);
      res.gen_p(g) = inj.gen_p(g);
      scheduled += inj.gen_p(g);
    }
    double demand = 0.0;
    for (int d : loads) {
      p(local_of[load_node(d)]) -= inj.load_p(d);
      demand += inj.load_p(d);
    }

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(size);
    double island_loss = 0.0;
    if (size > 1) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(size - 1, size - 1);
      for (int l : lines) {
        const auto [nf, nt] = line_nodes(l);
        const int i = local_of[nf];
        const int j = local_of[nt];
        if (i == j) continue;
        const double y = 1.0 / spec.lines[l].reactance;
        if (i != slack_local) b(reduced(i, slack_local), reduced(i, slack_local)) += y;
        if (j != slack_local) b(reduced(j, slack_local), reduced(j, slack_local)) += y;
        if (i != slack_local && j != slack_local) {
          b(reduced(i, slack_local), reduced(j, slack_local)) -= y;
          b(reduced(j, slack_local), reduced(i, slack_local)) -= y;
        }
      }
      const Eigen::LDLT<Eigen::MatrixXd> factor(b);
      auto solve_angles = [&](const Eigen::VectorXd& p_mw) -> bool {
        Eigen::VectorXd rhs(size - 1);
        for (Eigen::Index i = 0; i < size; ++i) {
          if (i != slack_local) rhs(reduced(static_cast<int>(i), slack_local)) = p_mw(i) / base;
        }
        const Eigen::VectorXd x = factor.solve(rhs);
        if (factor.info() != Eigen::Success || !factor.isPositive() || !x.allFinite() ||
            (b * x - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) {
          return false;
        }
        theta.setZero();
        for (Eigen::Index i = 0; i < size; ++i) {
          if (i != slack_local) theta(i) = x(reduced(static_cast<int>(i), slack_local));
        }
        return true;
      };
      auto flow_of = [&](int l) {
        const auto [nf, nt] = line_nodes(l);
        return (theta(local_of[nf]) - theta(local_of[nt])) / spec.lines[l].reactance * base;
      };

      if (!solve_angles(p)) {
        res.diverged = true;
        return res;
      }
      Eigen::VectorXd p_corrected = p;
      for (int l : lines) {
        const double f = flow_of(l) / base;
        const double loss = spec.lines[l].resistance * f * f * base;
        res.line_loss(l) = loss;
        island_loss += loss;
        const auto [nf, nt] = line_nodes(l);
        p_corrected(local_of[nf]) -= 0.5 * loss;
        p_corrected(local_of[nt]) -= 0.5 * loss;
      }
      if (!solve_angles(p_corrected)) {
        res.diverged = true;
        return res;
      }
      for (int l : lines) {
        res.line_flow(l) = flow_of(l);
        res.rho(l) = std::abs(res.line_flow(l)) / spec.lines[l].thermal_limit;
      }
    }
    for (Eigen::Index i = 0; i < size; ++i) {
      const auto& node = parts[k][i];
      res.node_angle(res.node_index(node.substation, node.bus)) = theta(i);
    }
    const double slack_out = demand + island_loss - scheduled;
    res.gen_p(slack) = slack_out;
    res.total_loss += island_loss;
  }
  res.slack_p = res.gen_p(spec.slack);
  std::sort(res.unserved.begin(), res.unserved.end());
  if (!res.gen_p.allFinite() || !res.line_flow.allFinite()) res.diverged = true;
  return res;
}

bool apply_slack_limits(const GridSpec& spec, const PowerFlowResult& result) {
  for (int g : result.island_slack) {
    const auto& gen = spec.generators[g];
    if (result.gen_p(g) < gen.p_min - kSlackTolerance || result.gen_p(g) > gen.p_max + kSlackTolerance) return false;
  }
  return true;
}

}  // namespace gridrl
