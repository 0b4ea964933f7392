#pragma once

#include <random>
#include <vector>

#include "gridrl/action_space.hpp"
#include "gridrl/nn/tensor.hpp"

namespace gridrl::nn {

/// Stacks masks into a batch x total matrix of 0/1.
Matrix mask_matrix(const std::vector<const ActionMask*>& masks);

/// Factorized categorical over every element of the layout, with masked
/// choices at probability exactly 0.
class MaskedCategoricalSet {
 public:
  MaskedCategoricalSet(const Tensor& logits, Matrix mask, const ActionLayout& layout);

  /// batch x total; masked entries hold 0.
  const Tensor& log_probs() const { return log_probs_; }
  Matrix probs() const;
  /// Sum over elements of log p(choice); batch x 1.
  Tensor log_prob(const std::vector<std::vector<int>>& actions) const;
  /// Sum over elements of the entropy of unmasked entries; batch x 1.
  Tensor entropy() const;

  std::vector<int> sample(Eigen::Index row, std::mt19937_64& rng) const;
  /// Most likely valid choice per element; ties go to the lowest index.
  std::vector<int> argmax(Eigen::Index row) const;

  Eigen::Index batch() const { return mask_.rows(); }

 private:
  Tensor log_probs_;
  Matrix mask_;
  const ActionLayout* layout_;
};

}  // namespace gridrl::nn
