#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace gridrl::nn {

using Matrix = Eigen::MatrixXd;

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

/// Dense matrix value recorded on an implicit tape. Every op returns a new
/// tensor that remembers its parents when any of them requires gradients;
/// backward() walks that DAG in reverse topological order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  /// Accumulated gradient; a zero matrix of the value's shape if none.
  Matrix grad() const;
  bool has_grad() const { return node_ && node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  /// Internal: builds a result node from parents and a backward rule.
  static Tensor make(Matrix value, std::vector<Tensor> parents, std::function<void(detail::Node&)> backward);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// While alive, ops on this thread record no tape (inference only).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Propagates d(loss)/d(x) into every tensor reachable from a 1x1 loss.
/// Gradients accumulate until zero_grad().
void backward(const Tensor& loss);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
/// Elementwise product.
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
/// a (n x m) plus a 1 x m row broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor row_sum(const Tensor& a);

/// Rows `index[i]` of a, stacked.
Tensor gather_rows(const Tensor& a, std::vector<int> index);
/// n_rows x cols result whose row index[i] accumulates row i of a.
Tensor scatter_rows(const Tensor& a, std::vector<int> index, Eigen::Index n_rows);
/// Mean of the rows sharing each segment id; empty segments give zeros.
Tensor segment_mean(const Tensor& a, std::vector<int> segment, Eigen::Index n_segments);

/// Row-wise log-softmax restricted to each column group
/// [offsets[k], offsets[k] + dims[k]) and to entries with mask == 1.
/// Masked entries hold 0 and receive no gradient.
Tensor masked_log_softmax(const Tensor& logits, const Matrix& mask, std::vector<int> offsets, std::vector<int> dims);

/// Single-head attention restricted to an edge list. Edge e lets node
/// dst[e] attend to node src[e] with score q_dst . k_src / sqrt(d) + bias[e];
/// scores are softmax-normalized over the incoming edges of each node.
Tensor graph_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& edge_bias,
                       std::vector<int> dst, std::vector<int> src);

}  // namespace gridrl::nn
