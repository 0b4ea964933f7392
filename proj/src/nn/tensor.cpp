#include "gridrl/nn/tensor.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

namespace gridrl::nn {

using detail::Node;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()) + ")");
  }
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

thread_local bool grad_disabled = false;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(grad_disabled) { grad_disabled = true; }
NoGradGuard::~NoGradGuard() { grad_disabled = previous_; }

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ContractError("item() on a non-scalar tensor");
  return node_->value(0, 0);
}

Tensor Tensor::make(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward) {
  Tensor out(std::move(value));
  bool needs = false;
  if (!grad_disabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    out.node_->requires_grad = true;
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward() needs a scalar (1x1) loss");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimensions differ");
  return Tensor::make(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& x = parent(n, 0);
    Node& y = parent(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * n.grad);
  });
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return Tensor::make(a.value() + b.value(), {a, b}, [](Node& n) {
    for (auto& p : n.parents) {
      if (p->requires_grad) p->accumulate(n.grad);
    }
  });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return Tensor::make(a.value() - b.value(), {a, b}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate(-n.grad);
  });
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return Tensor::make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& x = parent(n, 0);
    Node& y = parent(n, 1);
    if (x.requires_grad) x.accumulate(n.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(n.grad.cwiseProduct(x.value));
  });
}

Tensor scale(const Tensor& a, double s) {
  return Tensor::make(a.value() * s, {a}, [s](Node& n) { parent(n, 0).accumulate(n.grad * s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return Tensor::make(a.value().array() + s, {a}, [](Node& n) { parent(n, 0).accumulate(n.grad); });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractError("add_row: bias must be 1 x cols");
  Matrix v = a.value().rowwise() + row.value().row(0);
  return Tensor::make(std::move(v), {a, row}, [](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(n.grad);
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Tensor tanh(const Tensor& a) {
  Matrix v = a.value().array().tanh();
  return Tensor::make(v, {a}, [v](Node& n) {
    parent(n, 0).accumulate(n.grad.cwiseProduct((1.0 - v.array().square()).matrix()));
  });
}

Tensor relu(const Tensor& a) {
  Matrix v = a.value().cwiseMax(0.0);
  return Tensor::make(v, {a}, [](Node& n) {
    const Matrix& x = parent(n, 0).value;
    parent(n, 0).accumulate((x.array() > 0.0).select(n.grad, 0.0));
  });
}

Tensor exp(const Tensor& a) {
  Matrix v = a.value().array().exp();
  return Tensor::make(v, {a}, [v](Node& n) { parent(n, 0).accumulate(n.grad.cwiseProduct(v)); });
}

Tensor log(const Tensor& a) {
  return Tensor::make(a.value().array().log(), {a}, [](Node& n) {
    parent(n, 0).accumulate(n.grad.cwiseQuotient(parent(n, 0).value));
  });
}

Tensor square(const Tensor& a) {
  return Tensor::make(a.value().array().square(), {a}, [](Node& n) {
    parent(n, 0).accumulate(2.0 * n.grad.cwiseProduct(parent(n, 0).value));
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "minimum");
  // Ties route the gradient to the first argument.
  const auto pick_a = (a.value().array() <= b.value().array()).eval();
  Matrix v = pick_a.select(a.value(), b.value());
  return Tensor::make(std::move(v), {a, b}, [pick_a](Node& n) {
    if (parent(n, 0).requires_grad) parent(n, 0).accumulate(pick_a.select(n.grad, 0.0));
    if (parent(n, 1).requires_grad) parent(n, 1).accumulate(pick_a.select(0.0, n.grad));
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  const auto inside = ((a.value().array() >= lo) && (a.value().array() <= hi)).eval();
  return Tensor::make(a.value().cwiseMax(lo).cwiseMin(hi), {a}, [inside](Node& n) {
    parent(n, 0).accumulate(inside.select(n.grad, 0.0));
  });
}

Tensor sum(const Tensor& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return Tensor::make(std::move(v), {a}, [](Node& n) {
    const Node& x = parent(n, 0);
    parent(n, 0).accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  if (a.value().size() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor row_sum(const Tensor& a) {
  return Tensor::make(a.value().rowwise().sum(), {a}, [](Node& n) {
    const Eigen::Index cols = parent(n, 0).value.cols();
    parent(n, 0).accumulate(n.grad.replicate(1, cols));
  });
}

Tensor gather_rows(const Tensor& a, std::vector<int> index) {
  Matrix v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw ContractError("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return Tensor::make(std::move(v), {a}, [index = std::move(index)](Node& n) {
    Node& x = parent(n, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    x.accumulate(g);
  });
}

Tensor scatter_rows(const Tensor& a, std::vector<int> index, Eigen::Index n_rows) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) throw ContractError("scatter_rows: one index per row");
  Matrix v = Matrix::Zero(n_rows, a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= n_rows) throw ContractError("scatter_rows: index out of range");
    v.row(index[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  return Tensor::make(std::move(v), {a}, [index = std::move(index)](Node& n) {
    Node& x = parent(n, 0);
    Matrix g(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < index.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = n.grad.row(index[i]);
    x.accumulate(g);
  });
}

Tensor segment_mean(const Tensor& a, std::vector<int> segment, Eigen::Index n_segments) {
  if (static_cast<Eigen::Index>(segment.size()) != a.rows()) throw ContractError("segment_mean: one id per row");
  std::vector<double> count(n_segments, 0.0);
  for (int s : segment) {
    if (s < 0 || s >= n_segments) throw ContractError("segment_mean: id out of range");
    count[s] += 1.0;
  }
  Matrix v = Matrix::Zero(n_segments, a.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) v.row(segment[i]) += a.value().row(static_cast<Eigen::Index>(i));
  for (Eigen::Index s = 0; s < n_segments; ++s) {
    if (count[s] > 0) v.row(s) /= count[s];
  }
  return Tensor::make(std::move(v), {a}, [segment = std::move(segment), count = std::move(count)](Node& n) {
    Node& x = parent(n, 0);
    Matrix g(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < segment.size(); ++i) {
      g.row(static_cast<Eigen::Index>(i)) = n.grad.row(segment[i]) / count[segment[i]];
    }
    x.accumulate(g);
  });
}

Tensor masked_log_softmax(const Tensor& logits, const Matrix& mask, std::vector<int> offsets, std::vector<int> dims) {
  if (mask.rows() != logits.rows() || mask.cols() != logits.cols()) {
    throw ContractError("masked_log_softmax: mask shape differs from logits");
  }
  if (offsets.size() != dims.size()) throw ContractError("masked_log_softmax: offsets/dims size mismatch");
  const Matrix& x = logits.value();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      double peak = -std::numeric_limits<double>::infinity();
      for (int c = offsets[k]; c < offsets[k] + dims[k]; ++c) {
        if (mask(r, c) != 0.0) peak = std::max(peak, x(r, c));
      }
      if (!std::isfinite(peak)) throw ContractError("masked_log_softmax: group with no valid entry");
      double z = 0.0;
      for (int c = offsets[k]; c < offsets[k] + dims[k]; ++c) {
        if (mask(r, c) != 0.0) z += std::exp(x(r, c) - peak);
      }
      const double lse = peak + std::log(z);
      for (int c = offsets[k]; c < offsets[k] + dims[k]; ++c) {
        if (mask(r, c) != 0.0) out(r, c) = x(r, c) - lse;
      }
    }
  }
  Matrix result = out;
  return Tensor::make(std::move(result), {logits},
                      [out = std::move(out), mask, offsets = std::move(offsets), dims = std::move(dims)](Node& n) {
                        Matrix g = Matrix::Zero(out.rows(), out.cols());
                        for (Eigen::Index r = 0; r < out.rows(); ++r) {
                          for (std::size_t k = 0; k < offsets.size(); ++k) {
                            double total = 0.0;
                            for (int c = offsets[k]; c < offsets[k] + dims[k]; ++c) {
                              if (mask(r, c) != 0.0) total += n.grad(r, c);
                            }
                            for (int c = offsets[k]; c < offsets[k] + dims[k]; ++c) {
                              if (mask(r, c) != 0.0) g(r, c) = n.grad(r, c) - std::exp(out(r, c)) * total;
                            }
                          }
                        }
                        parent(n, 0).accumulate(g);
                      });
}

Tensor graph_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& edge_bias,
                       std::vector<int> dst, std::vector<int> src) {
  require_same_shape(q, k, "graph_attention");
  if (v.rows() != q.rows()) throw ContractError("graph_attention: value rows differ");
  if (dst.size() != src.size() || edge_bias.rows() != static_cast<Eigen::Index>(dst.size()) || edge_bias.cols() != 1) {
    throw ContractError("graph_attention: edge list and bias disagree");
  }
  const Eigen::Index n_nodes = q.rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));

  // Incoming edges per node.
  std::vector<std::vector<int>> incoming(n_nodes);
  for (std::size_t e = 0; e < dst.size(); ++e) {
    if (dst[e] < 0 || dst[e] >= n_nodes || src[e] < 0 || src[e] >= n_nodes) {
      throw ContractError("graph_attention: node index out of range");
    }
    incoming[dst[e]].push_back(static_cast<int>(e));
  }

  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dst.size()));
  Matrix out = Matrix::Zero(n_nodes, vv.cols());
  for (Eigen::Index i = 0; i < n_nodes; ++i) {
    const auto& in = incoming[i];
    if (in.empty()) continue;
    double peak = -std::numeric_limits<double>::infinity();
    for (int e : in) {
      alpha(e) = qv.row(i).dot(kv.row(src[e])) * inv_sqrt_d + edge_bias.value()(e, 0);
      peak = std::max(peak, alpha(e));
    }
    double z = 0.0;
    for (int e : in) {
      alpha(e) = std::exp(alpha(e) - peak);
      z += alpha(e);
    }
    for (int e : in) {
      alpha(e) /= z;
      out.row(i) += alpha(e) * vv.row(src[e]);
    }
  }

  return Tensor::make(std::move(out), {q, k, v, edge_bias},
                      [alpha, incoming = std::move(incoming), src = std::move(src), inv_sqrt_d](Node& n) {
                        Node& qn = parent(n, 0);
                        Node& kn = parent(n, 1);
                        Node& vn = parent(n, 2);
                        Node& bn = parent(n, 3);
                        const Matrix& qv = qn.value;
                        const Matrix& kv = kn.value;
                        const Matrix& vv = vn.value;
                        Matrix gq = Matrix::Zero(qv.rows(), qv.cols());
                        Matrix gk = Matrix::Zero(kv.rows(), kv.cols());
                        Matrix gv = Matrix::Zero(vv.rows(), vv.cols());
                        Matrix gb = Matrix::Zero(alpha.size(), 1);
                        for (std::size_t i = 0; i < incoming.size(); ++i) {
                          const auto& in = incoming[i];
                          if (in.empty()) continue;
                          const auto gi = n.grad.row(static_cast<Eigen::Index>(i));
                          double weighted = 0.0;
                          std::vector<double> dalpha(in.size());
                          for (std::size_t j = 0; j < in.size(); ++j) {
                            const int e = in[j];
                            dalpha[j] = gi.dot(vv.row(src[e]));
                            weighted += alpha(e) * dalpha[j];
                            gv.row(src[e]) += alpha(e) * gi;
                          }
                          for (std::size_t j = 0; j < in.size(); ++j) {
                            const int e = in[j];
                            const double ds = alpha(e) * (dalpha[j] - weighted);
                            gb(e, 0) += ds;
                            gq.row(static_cast<Eigen::Index>(i)) += ds * inv_sqrt_d * kv.row(src[e]);
                            gk.row(src[e]) += ds * inv_sqrt_d * qv.row(static_cast<Eigen::Index>(i));
                          }
                        }
                        if (qn.requires_grad) qn.accumulate(gq);
                        if (kn.requires_grad) kn.accumulate(gk);
                        if (vn.requires_grad) vn.accumulate(gv);
                        if (bn.requires_grad) bn.accumulate(gb);
                      });
}

}  // namespace gridrl::nn
