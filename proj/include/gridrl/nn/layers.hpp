#pragma once

#include <random>
#include <vector>

#include "gridrl/nn/tensor.hpp"

namespace gridrl::nn {

/// Uniform in +-sqrt(6 / (fan_in + fan_out)), times gain.
Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng, double gain = 1.0);

/// y = x W + b, with W stored fan_in x fan_out.
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng, double gain = 1.0);

  Tensor operator()(const Tensor& x) const { return add_row(matmul(x, weight), bias); }
  void collect(std::vector<Tensor>& params) const;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void zero_grad();
  void step();

  double learning_rate() const { return lr_; }
  long steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

}  // namespace gridrl::nn
