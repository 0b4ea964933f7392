#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gridrl/action_space.hpp"
#include "gridrl/nn/encoders.hpp"

namespace gridrl::nn {

struct PolicyOutput {
  Tensor logits;  // batch x layout.total()
  Tensor value;   // batch x 1
};

/// FNV-1a over the action dimensions and the encoder variant.
std::uint64_t schema_hash(const ActionLayout& layout, EncoderKind kind);

/// Encoder followed by separate actor and critic heads of three tanh
/// layers each.
class PolicyNetwork {
 public:
  PolicyNetwork(EncoderKind kind, const GridSpec& spec, std::uint64_t seed, int hidden = kHidden);

  PolicyOutput forward(const std::vector<const EncodedObs*>& batch) const;

  EncoderKind kind() const { return encoder_.kind(); }
  const ActionLayout& layout() const { return layout_; }
  const Encoder& encoder() const { return encoder_; }
  std::uint64_t schema_hash() const { return schema_; }

  std::vector<Tensor> parameters() const;
  /// Number of scalar parameters.
  std::size_t parameter_count() const;
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& values);

 private:
  ActionLayout layout_;
  Encoder encoder_;
  std::array<Linear, 3> actor_;
  Linear actor_out_;
  std::array<Linear, 3> critic_;
  Linear critic_out_;
  std::uint64_t schema_;
};

}  // namespace gridrl::nn
