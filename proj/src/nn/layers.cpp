#include "gridrl/nn/layers.hpp"

#include <cmath>

namespace gridrl::nn {

Matrix xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index j = 0; j < fan_out; ++j) {
    for (Eigen::Index i = 0; i < fan_in; ++i) w(i, j) = u(rng);
  }
  return w;
}

Linear::Linear(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng, double gain)
    : weight(Tensor::parameter(xavier_uniform(in, out, rng, gain))), bias(Tensor::parameter(Matrix::Zero(1, out))) {}

void Linear::collect(std::vector<Tensor>& params) const {
  params.push_back(weight);
  params.push_back(bias);
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.has_grad()) sq += p.node()->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (const auto& p : params) {
      if (p.has_grad()) p.node()->grad *= k;
    }
  }
  return norm;
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    const Matrix& g = p.node()->grad;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
    const auto m_hat = (m_[i] / c1).array();
    const auto v_hat = (v_[i] / c2).array();
    p.mutable_value().array() -= lr_ * m_hat / (v_hat.sqrt() + eps_);
  }
}

}  // namespace gridrl::nn
