#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gridrl/nn/tensor.hpp"

namespace gridrl::testing {

struct GradCheck {
  double worst = 0.0;  // largest relative error seen
  std::string where;
  int compared = 0;
};

/// Central differences with step h on up to max_coords entries of every
/// parameter; the relative error of entry i is
/// |analytic - numeric| / max(|analytic| + |numeric|, floor).
inline GradCheck grad_check(const std::function<nn::Tensor()>& loss_fn, std::vector<nn::Tensor> params,
                            double h = 1e-5, int max_coords = 64, std::uint64_t seed = 1, double floor = 1e-6) {
  for (auto& p : params) p.zero_grad();
  nn::backward(loss_fn());
  std::vector<nn::Matrix> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());

  GradCheck out;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < params.size(); ++k) {
    nn::Matrix& v = params[k].mutable_value();
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
    std::shuffle(coords.begin(), coords.end(), rng);
    if (static_cast<int>(coords.size()) > max_coords) coords.resize(max_coords);
    for (Eigen::Index i : coords) {
      const double keep = v(i);
      double up = 0.0;
      double down = 0.0;
      {
        nn::NoGradGuard guard;
        v(i) = keep + h;
        up = loss_fn().item();
        v(i) = keep - h;
        down = loss_fn().item();
      }
      v(i) = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k](i);
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor);
      ++out.compared;
      if (rel > out.worst) {
        out.worst = rel;
        out.where = "param " + std::to_string(k) + " entry " + std::to_string(i) + " analytic " + std::to_string(a) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return out;
}

inline nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

/// Random values kept at least `gap` away from every kink in `kinks`.
inline nn::Matrix away_from(nn::Matrix m, const std::vector<double>& kinks, double gap) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    for (double k : kinks) {
      if (std::abs(m(i) - k) < gap) m(i) = k + (m(i) < k ? -gap : gap);
    }
  }
  return m;
}

}  // namespace gridrl::testing
