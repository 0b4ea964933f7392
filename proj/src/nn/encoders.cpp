#include "gridrl/nn/encoders.hpp"

#include <stdexcept>

namespace gridrl::nn {

namespace {

constexpr double kTimerScale = 1.0 / 12.0;        // steps -> hours
constexpr double kMaintenanceScale = 1.0 / 288.0;  // steps -> days
constexpr double kDegreeScale = 0.25;
constexpr double kCostScale = 0.01;

void scale_common(Eigen::VectorXd& f, double inv_base) { f.head(3) *= inv_base; }

}  // namespace

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kFlat:
      return "flat";
    case EncoderKind::kSubstationGraph:
      return "substation-graph";
    case EncoderKind::kElementGraph:
      return "element-graph";
  }
  return "unknown";
}

EncoderKind encoder_from_string(std::string_view name) {
  if (name == "flat") return EncoderKind::kFlat;
  if (name == "substation-graph") return EncoderKind::kSubstationGraph;
  if (name == "element-graph") return EncoderKind::kElementGraph;
  throw std::invalid_argument("unknown encoder variant '" + std::string(name) + "'");
}

GraphInput permute_nodes(const GraphInput& g, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != g.n_nodes()) throw ContractError("permutation size differs from node count");
  std::vector<int> where(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) where[perm[i]] = static_cast<int>(i);
  GraphInput out;
  for (int old : perm) {
    out.node_type.push_back(g.node_type[old]);
    out.node_x.push_back(g.node_x[old]);
  }
  for (const auto& [u, v] : g.edges) out.edges.emplace_back(where[u], where[v]);
  out.edge_x = g.edge_x;
  return out;
}

EncodedObs featurize(const FlatObs& obs, const GridSpec& spec) {
  EncodedObs out;
  out.kind = EncoderKind::kFlat;
  out.flat = obs.values;
  const int n_power = 3 * (spec.n_gen() + spec.n_load());
  out.flat.segment(spec.n_gen(), n_power) /= spec.base_power;
  return out;
}

EncodedObs featurize(const SubGraphObs& obs, const GridSpec& spec) {
  EncodedObs out;
  out.kind = EncoderKind::kSubstationGraph;
  const double inv_base = 1.0 / spec.base_power;
  auto& g = out.graph;
  for (Eigen::Index i = 0; i < obs.node_features.rows(); ++i) {
    Eigen::VectorXd f = obs.node_features.row(i).transpose();
    scale_common(f, inv_base);
    g.node_type.push_back(0);
    g.node_x.push_back(std::move(f));
  }
  g.edges = obs.edges;
  g.edge_x = obs.edge_features;
  if (g.edge_x.rows() > 0) {
    g.edge_x.leftCols(3) *= inv_base;
    g.edge_x.col(7) *= kTimerScale;
    g.edge_x.col(8) *= kTimerScale;
    g.edge_x.col(9) *= kMaintenanceScale;
    g.edge_x.col(10) *= 0.5;
  } else {
    g.edge_x.resize(0, SubGraphObs::kEdgeFeatures);
  }
  return out;
}

EncodedObs featurize(const ElemGraphObs& obs, const GridSpec& spec) {
  EncodedObs out;
  out.kind = EncoderKind::kElementGraph;
  const double inv_base = 1.0 / spec.base_power;
  auto& g = out.graph;
  for (int i = 0; i < obs.n_nodes(); ++i) {
    Eigen::VectorXd f = obs.node_features[i];
    scale_common(f, inv_base);
    switch (obs.node_type[i]) {
      case NodeType::kBus:
        f(8) *= kTimerScale;
        break;
      case NodeType::kGenerator:
        f.segment(6, 2) *= inv_base;
        f.segment(8, 2) *= kTimerScale;
        f.segment(10, 3) *= kCostScale;
        break;
      case NodeType::kLine:
        f.segment(6, 2) *= kTimerScale;
        f(8) *= kMaintenanceScale;
        break;
      default:
        break;
    }
    g.node_type.push_back(static_cast<int>(obs.node_type[i]));
    g.node_x.push_back(std::move(f));
  }
  g.edges = obs.edges;
  g.edge_x = obs.edge_connected;
  return out;
}

EncodedObs featurize(EncoderKind kind, const GridSpec& spec, const GridState& state, const PowerFlowResult& flow) {
  switch (kind) {
    case EncoderKind::kFlat:
      return featurize(build_flat(spec, state, flow), spec);
    case EncoderKind::kSubstationGraph:
      return featurize(build_substation_graph(spec, state, flow), spec);
    case EncoderKind::kElementGraph:
      return featurize(build_element_graph(spec, state, flow), spec);
  }
  throw ContractError("unknown encoder kind");
}

Encoder::Encoder(EncoderKind kind, const GridSpec& spec, std::mt19937_64& rng, int hidden)
    : kind_(kind), hidden_(hidden) {
  if (kind_ == EncoderKind::kFlat) {
    input_width_ = flat_size(spec);
    flat_ = Linear(input_width_, hidden_, rng);
    return;
  }
  if (kind_ == EncoderKind::kSubstationGraph) {
    type_width_ = {SubGraphObs::kNodeFeatures};
    edge_width_ = SubGraphObs::kEdgeFeatures;
  } else {
    type_width_.assign(kElementFeatureWidth.begin(), kElementFeatureWidth.end());
    edge_width_ = 1;
  }
  for (int w : type_width_) type_proj_.emplace_back(w, hidden_, rng);
  degree_proj_ = Linear(2, hidden_, rng);
  query_ = Linear(hidden_, hidden_, rng);
  key_ = Linear(hidden_, hidden_, rng);
  value_ = Linear(hidden_, hidden_, rng);
  out_ = Linear(hidden_, hidden_, rng);
  // Last edge-score input flags self loops.
  edge_score_ = Linear(edge_width_ + 1, 1, rng);
}

void Encoder::collect(std::vector<Tensor>& params) const {
  if (kind_ == EncoderKind::kFlat) {
    flat_.collect(params);
    return;
  }
  for (const auto& p : type_proj_) p.collect(params);
  degree_proj_.collect(params);
  query_.collect(params);
  key_.collect(params);
  value_.collect(params);
  out_.collect(params);
  edge_score_.collect(params);
}

Tensor Encoder::node_states(const std::vector<const EncodedObs*>& batch, std::vector<int>* graph_of) const {
  const int n_types = static_cast<int>(type_width_.size());
  int n_total = 0;
  int e_total = 0;
  for (const auto* obs : batch) {
    if (obs->kind != kind_) throw ContractError("observation variant does not match the encoder");
    n_total += obs->graph.n_nodes();
    e_total += static_cast<int>(obs->graph.edges.size());
  }

  std::vector<std::vector<int>> rows(n_types);
  std::vector<int> owner;
  owner.reserve(n_total);
  Matrix degree = Matrix::Zero(n_total, 2);
  std::vector<int> dst;
  std::vector<int> src;
  Matrix edge_in = Matrix::Zero(2 * e_total + n_total, edge_width_ + 1);
  int base = 0;
  int e_row = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const GraphInput& g = batch[b]->graph;
    for (int i = 0; i < g.n_nodes(); ++i) {
      const int t = g.node_type[i];
      if (t < 0 || t >= n_types || g.node_x[i].size() != type_width_[t]) {
        throw ContractError("node feature width does not match its type");
      }
      rows[t].push_back(base + i);
      owner.push_back(static_cast<int>(b));
    }
    if (g.edge_x.rows() != static_cast<Eigen::Index>(g.edges.size()) || (g.edge_x.size() > 0 && g.edge_x.cols() != edge_width_)) {
      throw ContractError("edge features do not match the edge list");
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const int u = base + g.edges[e].first;
      const int v = base + g.edges[e].second;
      degree(u, 0) += kDegreeScale;
      degree(v, 0) += kDegreeScale;
      for (auto [d, s] : {std::pair{u, v}, std::pair{v, u}}) {
        dst.push_back(d);
        src.push_back(s);
        edge_in.row(e_row).head(edge_width_) = g.edge_x.row(static_cast<Eigen::Index>(e));
        ++e_row;
      }
    }
    base += g.n_nodes();
  }
  if (graph_of) *graph_of = owner;
  if (n_total == 0) return Tensor(Matrix::Zero(0, hidden_));
  // Undirected: in-degree and out-degree coincide.
  degree.col(1) = degree.col(0);
  for (int i = 0; i < n_total; ++i) {
    dst.push_back(i);
    src.push_back(i);
    edge_in(e_row++, edge_width_) = 1.0;
  }

  Tensor h = degree_proj_(Tensor(degree));
  for (int t = 0; t < n_types; ++t) {
    if (rows[t].empty()) continue;
    Matrix x(static_cast<Eigen::Index>(rows[t].size()), type_width_[t]);
    // Recover each row's features from its graph.
    int r = 0;
    for (const auto* obs : batch) {
      const GraphInput& g = obs->graph;
      for (int i = 0; i < g.n_nodes(); ++i) {
        if (g.node_type[i] == t) x.row(r++) = g.node_x[i].transpose();
      }
    }
    h = h + scatter_rows(type_proj_[t](Tensor(std::move(x))), rows[t], n_total);
  }

  const Tensor bias = edge_score_(Tensor(std::move(edge_in)));
  const Tensor att = graph_attention(query_(h), key_(h), value_(h), bias, std::move(dst), std::move(src));
  return relu(h + out_(att));
}

Tensor Encoder::operator()(const std::vector<const EncodedObs*>& batch) const {
  if (kind_ == EncoderKind::kFlat) {
    Matrix x(static_cast<Eigen::Index>(batch.size()), input_width_);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (batch[b]->kind != kind_ || batch[b]->flat.size() != input_width_) {
        throw ContractError("flat observation does not match the encoder");
      }
      x.row(static_cast<Eigen::Index>(b)) = batch[b]->flat.transpose();
    }
    return tanh(flat_(Tensor(std::move(x))));
  }
  std::vector<int> graph_of;
  Tensor nodes = node_states(batch, &graph_of);
  if (nodes.rows() == 0) return Tensor(Matrix::Zero(static_cast<Eigen::Index>(batch.size()), hidden_));
  return segment_mean(nodes, std::move(graph_of), static_cast<Eigen::Index>(batch.size()));
}

}  // namespace gridrl::nn
