#include "gridrl/nn/policy.hpp"

#include <random>

namespace gridrl::nn {

namespace {

// Initial logit of every element's do-nothing choice.
constexpr double kDoNothingPrior = 3.0;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::uint64_t schema_hash(const ActionLayout& layout, EncoderKind kind) {
  std::uint64_t h = 14695981039346656037ULL;
  for (int d : layout.dims) {
    const auto v = static_cast<std::int32_t>(d);
    h = fnv1a(h, &v, sizeof v);
  }
  const std::string name = to_string(kind);
  return fnv1a(h, name.data(), name.size());
}

namespace {

Encoder make_encoder(EncoderKind kind, const GridSpec& spec, std::uint64_t seed, int hidden) {
  std::mt19937_64 rng(seed);
  return Encoder(kind, spec, rng, hidden);
}

}  // namespace

PolicyNetwork::PolicyNetwork(EncoderKind kind, const GridSpec& spec, std::uint64_t seed, int hidden)
    : layout_(gridrl::layout(spec)),
      encoder_(make_encoder(kind, spec, seed, hidden)),
      schema_(nn::schema_hash(layout_, kind)) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& l : actor_) l = Linear(hidden, hidden, rng);
  for (auto& l : critic_) l = Linear(hidden, hidden, rng);
  // Small final actor layer, with each element starting biased towards
  // do-nothing so early episodes are not cut short by random switching.
  actor_out_ = Linear(hidden, layout_.total(), rng, 0.01);
  for (int e = 0; e < layout_.n_elements(); ++e) {
    actor_out_.bias.mutable_value()(0, layout_.offsets[e] + layout_.do_nothing[e]) = kDoNothingPrior;
  }
  critic_out_ = Linear(hidden, 1, rng);
}

PolicyOutput PolicyNetwork::forward(const std::vector<const EncodedObs*>& batch) const {
  const Tensor z = encoder_(batch);
  Tensor a = z;
  for (const auto& l : actor_) a = tanh(l(a));
  Tensor c = z;
  for (const auto& l : critic_) c = tanh(l(c));
  return {actor_out_(a), critic_out_(c)};
}

std::vector<Tensor> PolicyNetwork::parameters() const {
  std::vector<Tensor> out;
  encoder_.collect(out);
  for (const auto& l : actor_) l.collect(out);
  actor_out_.collect(out);
  for (const auto& l : critic_) l.collect(out);
  critic_out_.collect(out);
  return out;
}

std::size_t PolicyNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += static_cast<std::size_t>(p.value().size());
  return n;
}

Eigen::VectorXd PolicyNetwork::flat_parameters() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const auto& p : parameters()) {
    out.segment(k, p.value().size()) = p.value().reshaped();
    k += p.value().size();
  }
  return out;
}

void PolicyNetwork::set_flat_parameters(const Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != parameter_count()) {
    throw ContractError("parameter vector has the wrong length");
  }
  Eigen::Index k = 0;
  for (auto p : parameters()) {
    p.mutable_value().reshaped() = values.segment(k, p.value().size());
    k += p.value().size();
  }
}

}  // namespace gridrl::nn
