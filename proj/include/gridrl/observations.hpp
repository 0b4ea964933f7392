#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/grid_model.hpp"
#include "gridrl/powerflow.hpp"

namespace gridrl {

/// [|v| per gen] ++ [|p|, p, q per gen] ++ [|p|, p, q per load] ++ [rho per line] ++ [status per line]
struct FlatObs {
  Eigen::VectorXd values;
};

int flat_size(const GridSpec& spec);

/// Dynamic graph of live electrical nodes. Parallel lines between the
/// same pair of nodes share one edge.
struct SubGraphObs {
  static constexpr int kNodeFeatures = 6;   // |p|, p, q, |v|, sin t, cos t
  static constexpr int kEdgeFeatures = 11;  // |p|, p, q, |v|, sin t, cos t, rho, ts_overflow, ts_cooldown, maintenance, n_lines
  std::vector<ElectricalNode> nodes;
  Eigen::MatrixXd node_features;  // nodes x 6
  std::vector<std::pair<int, int>> edges;
  Eigen::MatrixXd edge_features;  // edges x 11
};

enum class NodeType : int { kBus = 0, kGenerator = 1, kLoad = 2, kLine = 3, kStorage = 4, kShunt = 5 };
inline constexpr int kNumNodeTypes = 6;

/// Feature width of each element-graph node type.
inline constexpr std::array<int, kNumNodeTypes> kElementFeatureWidth = {
    5 + 3 + 1,      // bus: common, one-hot {ground, busbar1, busbar2}, cooldown
    5 + 8 + 5,      // generator: common, g_norm + 7 characteristics, one-hot type
    5,              // load
    5 + 4,          // line: common, rho, ts_overflow, ts_cooldown, maintenance
    5,              // storage (schema only)
    5};             // shunt (schema only)

/// Fixed-size element graph: three bus nodes per substation (ground,
/// busbar1, busbar2), then generators, loads and lines. Each element is
/// joined to every bus node of its substation(s); the single edge feature
/// flags the bus the element endpoint currently sits on.
struct ElemGraphObs {
  std::vector<NodeType> node_type;
  std::vector<Eigen::VectorXd> node_features;  // width kElementFeatureWidth[type]
  std::vector<std::pair<int, int>> edges;      // (element node, bus node)
  Eigen::VectorXd edge_connected;              // 0 or 1 per edge

  int n_nodes() const { return static_cast<int>(node_type.size()); }
};

int element_graph_node_count(const GridSpec& spec);
int element_graph_edge_count(const GridSpec& spec);

FlatObs build_flat(const GridSpec& spec, const GridState& state, const PowerFlowResult& flow);
SubGraphObs build_substation_graph(const GridSpec& spec, const GridState& state, const PowerFlowResult& flow);
ElemGraphObs build_element_graph(const GridSpec& spec, const GridState& state, const PowerFlowResult& flow);

/// Structured text renderings for the CLI.
std::string to_json(const FlatObs& obs);
std::string to_json(const SubGraphObs& obs);
std::string to_json(const ElemGraphObs& obs);

}  // namespace gridrl
