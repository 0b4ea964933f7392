#pragma once

#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridrl/grid_model.hpp"
#include "gridrl/nn/layers.hpp"
#include "gridrl/observations.hpp"
#include "gridrl/powerflow.hpp"

namespace gridrl::nn {

inline constexpr int kHidden = 128;

enum class EncoderKind { kFlat, kSubstationGraph, kElementGraph };

std::string to_string(EncoderKind kind);
/// Accepts "flat", "substation-graph", "element-graph".
EncoderKind encoder_from_string(std::string_view name);

/// Network-ready graph: scaled node features of per-type width and an
/// undirected edge list with scaled edge features.
struct GraphInput {
  std::vector<int> node_type;
  std::vector<Eigen::VectorXd> node_x;
  std::vector<std::pair<int, int>> edges;
  Matrix edge_x;  // edges x edge width

  int n_nodes() const { return static_cast<int>(node_type.size()); }
};

/// Relabels nodes: node i of the result is node perm[i] of g.
GraphInput permute_nodes(const GraphInput& g, const std::vector<int>& perm);

struct EncodedObs {
  EncoderKind kind = EncoderKind::kFlat;
  Eigen::VectorXd flat;
  GraphInput graph;
};

/// Builds the observation of the requested variant and applies the fixed
/// feature scaling (powers in per-unit, timers in fractions of an hour).
EncodedObs featurize(EncoderKind kind, const GridSpec& spec, const GridState& state, const PowerFlowResult& flow);
EncodedObs featurize(const FlatObs& obs, const GridSpec& spec);
EncodedObs featurize(const SubGraphObs& obs, const GridSpec& spec);
EncodedObs featurize(const ElemGraphObs& obs, const GridSpec& spec);

/// Observation -> latent (batch x hidden).
class Encoder {
 public:
  Encoder(EncoderKind kind, const GridSpec& spec, std::mt19937_64& rng, int hidden = kHidden);

  Tensor operator()(const std::vector<const EncodedObs*>& batch) const;
  /// Post-attention node states of a batch of graphs, stacked.
  Tensor node_states(const std::vector<const EncodedObs*>& batch, std::vector<int>* graph_of = nullptr) const;
  void collect(std::vector<Tensor>& params) const;

  EncoderKind kind() const { return kind_; }
  int hidden() const { return hidden_; }

 private:
  EncoderKind kind_;
  int hidden_;
  int input_width_ = 0;  // flat only
  std::vector<int> type_width_;
  int edge_width_ = 0;
  Linear flat_;
  std::vector<Linear> type_proj_;
  Linear degree_proj_;
  Linear query_;
  Linear key_;
  Linear value_;
  Linear out_;
  Linear edge_score_;
};

}  // namespace gridrl::nn
