#include "gridrl/observations.hpp"

#include <cmath>
#include <map>

#include "json.hpp"

namespace gridrl {

namespace {

double voltage(bool live) { return live ? 1.0 : 0.0; }

double node_angle(const PowerFlowResult& flow, int sub, BusAssignment bus) {
  const int n = flow.node_index(sub, bus);
  return n < 0 ? 0.0 : flow.node_angle(n);
}

// Net injection (generation minus demand) per live node.
Eigen::VectorXd net_injection(const GridSpec& spec, const GridState& state, const PowerFlowResult& flow) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(flow.nodes.size()));
  for (int g = 0; g < spec.n_gen(); ++g) {
    const int n = flow.node_index(spec.generators[g].substation, state.gen_assignment[g]);
    if (n >= 0) p(n) += flow.gen_p(g);
  }
  for (int d = 0; d < spec.n_load(); ++d) {
    const int n = flow.node_index(spec.loads[d].substation, state.load_assignment[d]);
    if (n >= 0) p(n) -= flow.load_served(d);
  }
  return p;
}

int maintenance_feature(const GridState& state, int l) {
  return state.maintenance_remaining[l] > 0 ? state.maintenance_remaining[l] : state.maintenance_duration[l];
}

int bus_slot(BusAssignment b) { return static_cast<int>(b); }  // 0 ground, 1 busbar1, 2 busbar2

}  // namespace

int flat_size(const GridSpec& spec) { return spec.n_gen() + 3 * (spec.n_gen() + spec.n_load()) + 2 * spec.n_line(); }

FlatObs build_flat(const GridSpec& spec, const GridState& state, const PowerFlowResult& flow) {
  FlatObs obs;
  obs.values = Eigen::VectorXd::Zero(flat_size(spec));
  Eigen::Index k = 0;
  for (int g = 0; g < spec.n_gen(); ++g) obs.values(k++) = voltage(connected(state.gen_assignment[g]));
  for (int g = 0; g < spec.n_gen(); ++g) {
    const double p = connected(state.gen_assignment[g]) ? flow.gen_p(g) : 0.0;
    obs.values(k++) = std::abs(p);
    obs.values(k++) = p;
    obs.values(k++) = 0.0;
  }
  for (int d = 0; d < spec.n_load(); ++d) {
    const double p = connected(state.load_assignment[d]) ? flow.load_served(d) : 0.0;
    obs.values(k++) = std::abs(p);
    obs.values(k++) = p;
    obs.values(k++) = 0.0;
  }
  for (int l = 0; l < spec.n_line(); ++l) obs.values(k++) = flow.rho(l);
  for (int l = 0; l < spec.n_line(); ++l) obs.values(k++) = state.line_assignment[l].conducting() ? 1.0 : 0.0;
  return obs;
}

SubGraphObs build_substation_graph(const GridSpec& spec, const GridState& state, const PowerFlowResult& flow) {
  SubGraphObs obs;
  obs.nodes = flow.nodes;
  const auto n = static_cast<Eigen::Index>(obs.nodes.size());
  const Eigen::VectorXd p = net_injection(spec, state, flow);
  obs.node_features = Eigen::MatrixXd::Zero(n, SubGraphObs::kNodeFeatures);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double theta = flow.node_angle(i);
    obs.node_features.row(i) << std::abs(p(i)), p(i), 0.0, 1.0, std::sin(theta), std::cos(theta);
  }

  struct Aggregate {
    double p = 0.0, rho = 0.0;
    int overflow = 0, cooldown = 0, maintenance = 0, count = 0;
  };
  std::map<std::pair<int, int>, Aggregate> groups;
  for (int l = 0; l < spec.n_line(); ++l) {
    const auto& a = state.line_assignment[l];
    if (!a.conducting()) continue;
    int u = flow.node_index(spec.lines[l].from, a.origin);
    int v = flow.node_index(spec.lines[l].to, a.extremity);
    double f = flow.line_flow(l);
    if (u > v) {
      std::swap(u, v);
      f = -f;
    }
    auto& g = groups[{u, v}];
    g.p += f;
    g.rho = std::max(g.rho, flow.rho(l));
    g.overflow = std::max(g.overflow, state.overflow_counter[l]);
    g.cooldown = std::max(g.cooldown, state.line_cooldown[l]);
    g.maintenance = std::max(g.maintenance, maintenance_feature(state, l));
    ++g.count;
  }
  obs.edge_features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups.size()), SubGraphObs::kEdgeFeatures);
  Eigen::Index e = 0;
  for (const auto& [key, g] : groups) {
    obs.edges.push_back(key);
    const double dtheta = flow.node_angle(key.first) - flow.node_angle(key.second);
    obs.edge_features.row(e++) << std::abs(g.p), g.p, 0.0, 1.0, std::sin(dtheta), std::cos(dtheta), g.rho,
        static_cast<double>(g.overflow), static_cast<double>(g.cooldown), static_cast<double>(g.maintenance),
        static_cast<double>(g.count);
  }
  return obs;
}

int element_graph_node_count(const GridSpec& spec) {
  return 3 * spec.n_sub() + spec.n_gen() + spec.n_load() + spec.n_line();
}

int element_graph_edge_count(const GridSpec& spec) { return 3 * (spec.n_gen() + spec.n_load()) + 6 * spec.n_line(); }

ElemGraphObs build_element_graph(const GridSpec& spec, const GridState& state, const PowerFlowResult& flow) {
  ElemGraphObs obs;
  const Eigen::VectorXd inj = net_injection(spec, state, flow);
  auto bus_node = [](int sub, int slot) { return 3 * sub + slot; };

  for (int s = 0; s < spec.n_sub(); ++s) {
    for (int slot = 0; slot < 3; ++slot) {
      Eigen::VectorXd f = Eigen::VectorXd::Zero(kElementFeatureWidth[0]);
      if (slot > 0) {
        const int n = flow.node_index(s, static_cast<BusAssignment>(slot));
        if (n >= 0) f.head(5) << std::abs(inj(n)), inj(n), 0.0, 1.0, std::cos(flow.node_angle(n));
      }
      f(5 + slot) = 1.0;
      f(8) = state.sub_cooldown[s];
      obs.node_type.push_back(NodeType::kBus);
      obs.node_features.push_back(std::move(f));
    }
  }
  auto add_edges = [&](int element_node, int sub, BusAssignment at) {
    for (int slot = 0; slot < 3; ++slot) {
      obs.edges.emplace_back(element_node, bus_node(sub, slot));
    }
    return bus_slot(at);
  };
  std::vector<double> flags;
  auto push_flags = [&](int active_slot) {
    for (int slot = 0; slot < 3; ++slot) flags.push_back(slot == active_slot ? 1.0 : 0.0);
  };

  for (int g = 0; g < spec.n_gen(); ++g) {
    const auto& gen = spec.generators[g];
    const bool live = connected(state.gen_assignment[g]);
    const double p = live ? flow.gen_p(g) : 0.0;
    const double span = std::abs(gen.p_max) - std::abs(gen.p_min);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(kElementFeatureWidth[1]);
    f.head(5) << std::abs(p), p, 0.0, voltage(live),
        live ? std::cos(node_angle(flow, gen.substation, state.gen_assignment[g])) : 0.0;
    f(5) = span > 0.0 ? (std::abs(p) - std::abs(gen.p_min)) / span : 0.0;
    f(6) = gen.max_ramp_up;
    f(7) = gen.max_ramp_down;
    f(8) = gen.min_uptime;
    f(9) = gen.min_downtime;
    f(10) = gen.cost_per_mw;
    f(11) = gen.startup_cost;
    f(12) = gen.shutdown_cost;
    f(13 + static_cast<int>(gen.gen_type)) = 1.0;
    const int node = obs.n_nodes();
    obs.node_type.push_back(NodeType::kGenerator);
    obs.node_features.push_back(std::move(f));
    push_flags(add_edges(node, gen.substation, state.gen_assignment[g]));
  }
  for (int d = 0; d < spec.n_load(); ++d) {
    const auto& load = spec.loads[d];
    const bool live = connected(state.load_assignment[d]);
    const double p = live ? flow.load_served(d) : 0.0;
    Eigen::VectorXd f(kElementFeatureWidth[2]);
    f << std::abs(p), p, 0.0, voltage(live),
        live ? std::cos(node_angle(flow, load.substation, state.load_assignment[d])) : 0.0;
    const int node = obs.n_nodes();
    obs.node_type.push_back(NodeType::kLoad);
    obs.node_features.push_back(std::move(f));
    push_flags(add_edges(node, load.substation, state.load_assignment[d]));
  }
  for (int l = 0; l < spec.n_line(); ++l) {
    const auto& line = spec.lines[l];
    const auto& a = state.line_assignment[l];
    const bool live = a.conducting();
    const double p = live ? flow.line_flow(l) : 0.0;
    const double dtheta =
        live ? node_angle(flow, line.from, a.origin) - node_angle(flow, line.to, a.extremity) : 0.0;
    Eigen::VectorXd f(kElementFeatureWidth[3]);
    f << std::abs(p), p, 0.0, voltage(live), live ? std::cos(dtheta) : 0.0, flow.rho(l),
        static_cast<double>(state.overflow_counter[l]), static_cast<double>(state.line_cooldown[l]),
        static_cast<double>(maintenance_feature(state, l));
    const int node = obs.n_nodes();
    obs.node_type.push_back(NodeType::kLine);
    obs.node_features.push_back(std::move(f));
    push_flags(add_edges(node, line.from, a.origin));
    push_flags(add_edges(node, line.to, a.extremity));
  }
  obs.edge_connected = Eigen::Map<Eigen::VectorXd>(flags.data(), static_cast<Eigen::Index>(flags.size()));
  return obs;
}

std::string to_json(const FlatObs& obs) {
  nlohmann::ordered_json j;
  j["kind"] = "flat";
  j["values"] = std::vector<double>(obs.values.data(), obs.values.data() + obs.values.size());
  return j.dump(2);
}

std::string to_json(const SubGraphObs& obs) {
  nlohmann::ordered_json j;
  j["kind"] = "substation_graph";
  j["nodes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < obs.nodes.size(); ++i) {
    std::vector<double> f(SubGraphObs::kNodeFeatures);
    for (int k = 0; k < SubGraphObs::kNodeFeatures; ++k) f[k] = obs.node_features(static_cast<Eigen::Index>(i), k);
    j["nodes"].push_back({{"substation", obs.nodes[i].substation},
                          {"busbar", static_cast<int>(obs.nodes[i].bus)},
                          {"features", f}});
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < obs.edges.size(); ++e) {
    std::vector<double> f(SubGraphObs::kEdgeFeatures);
    for (int k = 0; k < SubGraphObs::kEdgeFeatures; ++k) f[k] = obs.edge_features(static_cast<Eigen::Index>(e), k);
    j["edges"].push_back({{"u", obs.edges[e].first}, {"v", obs.edges[e].second}, {"features", f}});
  }
  return j.dump(2);
}

std::string to_json(const ElemGraphObs& obs) {
  static const char* names[] = {"bus", "generator", "load", "line", "storage", "shunt"};
  nlohmann::ordered_json j;
  j["kind"] = "element_graph";
  j["nodes"] = nlohmann::ordered_json::array();
  for (int i = 0; i < obs.n_nodes(); ++i) {
    const auto& f = obs.node_features[i];
    j["nodes"].push_back({{"type", names[static_cast<int>(obs.node_type[i])]},
                          {"features", std::vector<double>(f.data(), f.data() + f.size())}});
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (std::size_t e = 0; e < obs.edges.size(); ++e) {
    j["edges"].push_back({{"element", obs.edges[e].first},
                          {"bus", obs.edges[e].second},
                          {"connected", static_cast<int>(obs.edge_connected(static_cast<Eigen::Index>(e)))}});
  }
  return j.dump(2);
}

}  // namespace gridrl
