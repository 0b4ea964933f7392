#include "gridrl/nn/distribution.hpp"

#include <cmath>

namespace gridrl::nn {

Matrix mask_matrix(const std::vector<const ActionMask*>& masks) {
  if (masks.empty()) return Matrix(0, 0);
  const auto width = static_cast<Eigen::Index>(masks.front()->valid.size());
  Matrix m(static_cast<Eigen::Index>(masks.size()), width);
  for (std::size_t r = 0; r < masks.size(); ++r) {
    if (static_cast<Eigen::Index>(masks[r]->valid.size()) != width) throw ContractError("mask widths differ");
    for (Eigen::Index c = 0; c < width; ++c) m(static_cast<Eigen::Index>(r), c) = masks[r]->valid[c] ? 1.0 : 0.0;
  }
  return m;
}

MaskedCategoricalSet::MaskedCategoricalSet(const Tensor& logits, Matrix mask, const ActionLayout& layout)
    : mask_(std::move(mask)), layout_(&layout) {
  if (logits.cols() != layout.total() || mask_.cols() != layout.total() || logits.rows() != mask_.rows()) {
    throw ContractError("logits and mask must both be batch x " + std::to_string(layout.total()));
  }
  log_probs_ = masked_log_softmax(logits, mask_, layout.offsets, layout.dims);
}

Matrix MaskedCategoricalSet::probs() const { return log_probs_.value().array().exp().matrix().cwiseProduct(mask_); }

Tensor MaskedCategoricalSet::log_prob(const std::vector<std::vector<int>>& actions) const {
  if (static_cast<Eigen::Index>(actions.size()) != batch()) throw ContractError("one action per batch row");
  Matrix pick = Matrix::Zero(mask_.rows(), mask_.cols());
  for (std::size_t r = 0; r < actions.size(); ++r) {
    if (static_cast<int>(actions[r].size()) != layout_->n_elements()) throw ContractError("action length mismatch");
    for (int e = 0; e < layout_->n_elements(); ++e) {
      const int c = actions[r][e];
      if (c < 0 || c >= layout_->dims[e]) throw ContractError("choice out of range");
      pick(static_cast<Eigen::Index>(r), layout_->offsets[e] + c) = 1.0;
    }
  }
  return row_sum(log_probs_ * Tensor(std::move(pick)));
}

Tensor MaskedCategoricalSet::entropy() const {
  const Tensor p = exp(log_probs_) * Tensor(mask_);
  return scale(row_sum(p * log_probs_), -1.0);
}

std::vector<int> MaskedCategoricalSet::sample(Eigen::Index row, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Matrix& lp = log_probs_.value();
  std::vector<int> out(layout_->n_elements());
  for (int e = 0; e < layout_->n_elements(); ++e) {
    const int off = layout_->offsets[e];
    const double u = unit(rng);
    double cum = 0.0;
    int chosen = -1;
    for (int c = 0; c < layout_->dims[e]; ++c) {
      if (mask_(row, off + c) == 0.0) continue;
      chosen = c;
      cum += std::exp(lp(row, off + c));
      if (u < cum) break;
    }
    if (chosen < 0) throw ContractError("element with no valid choice");
    out[e] = chosen;
  }
  return out;
}

std::vector<int> MaskedCategoricalSet::argmax(Eigen::Index row) const {
  const Matrix& lp = log_probs_.value();
  std::vector<int> out(layout_->n_elements());
  for (int e = 0; e < layout_->n_elements(); ++e) {
    const int off = layout_->offsets[e];
    int best = -1;
    for (int c = 0; c < layout_->dims[e]; ++c) {
      if (mask_(row, off + c) == 0.0) continue;
      if (best < 0 || lp(row, off + c) > lp(row, off + best)) best = c;
    }
    if (best < 0) throw ContractError("element with no valid choice");
    out[e] = best;
  }
  return out;
}

}  // namespace gridrl::nn
