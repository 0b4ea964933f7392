#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "gridrl/nn/checkpoint.hpp"
#include "gridrl/nn/distribution.hpp"
#include "gridrl/nn/policy.hpp"
#include "support.hpp"

using namespace gridrl;
using namespace gridrl::nn;
using gridrl::testing::fixture_chronics;
using gridrl::testing::fixture_spec;
using gridrl::testing::grad_check;
using gridrl::testing::random_matrix;

namespace {

EncodedObs observe(EncoderKind kind, const GridState& s, int chronic, int t) {
  const auto& spec = *fixture_spec();
  const auto& c = *fixture_chronics().at(chronic);
  const PowerFlowResult flow = solve(spec, s, {c.gen_p.row(t).transpose(), c.load_p.row(t).transpose()});
  return featurize(kind, spec, s, flow);
}

ActionLayout small_layout(std::vector<int> dims) {
  ActionLayout lay;
  int off = 0;
  for (int d : dims) {
    lay.offsets.push_back(off);
    lay.do_nothing.push_back(0);
    off += d;
  }
  lay.dims = std::move(dims);
  lay.n_line = lay.n_elements();
  return lay;
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "gridrl_neural_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("encoder names") {
  for (auto k : {EncoderKind::kFlat, EncoderKind::kSubstationGraph, EncoderKind::kElementGraph}) {
    CHECK(encoder_from_string(to_string(k)) == k);
  }
  CHECK_THROWS(encoder_from_string("mlp"));
}

TEST_CASE("flat featurization scales powers") {
  const auto& spec = *fixture_spec();
  const GridState s = default_state(spec);
  const auto& c = *fixture_chronics().at(0);
  const PowerFlowResult flow = solve(spec, s, {c.gen_p.row(100).transpose(), c.load_p.row(100).transpose()});
  const FlatObs raw = build_flat(spec, s, flow);
  const EncodedObs enc = featurize(raw, spec);
  REQUIRE(enc.flat.size() == raw.values.size());
  const int n_gen = static_cast<int>(spec.generators.size());
  const int n_pow = 3 * (n_gen + static_cast<int>(spec.loads.size()));
  CHECK(enc.flat.head(n_gen) == raw.values.head(n_gen));
  CHECK((enc.flat.segment(n_gen, n_pow) * spec.base_power - raw.values.segment(n_gen, n_pow)).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("graph readouts are permutation invariant") {
  const auto& spec = *fixture_spec();
  std::mt19937_64 rng(5);
  for (auto kind : {EncoderKind::kSubstationGraph, EncoderKind::kElementGraph}) {
    CAPTURE(to_string(kind));
    std::mt19937_64 init(9);
    const Encoder enc(kind, spec, init, 16);
    for (int trial = 0; trial < 20; ++trial) {
      const GridState s = gridrl::testing::random_topology(spec, rng, 0.1);
      const EncodedObs obs = observe(kind, s, trial % 20, (trial * 97) % 2016);
      std::vector<int> perm(static_cast<std::size_t>(obs.graph.n_nodes()));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      EncodedObs shuffled = obs;
      shuffled.graph = permute_nodes(obs.graph, perm);

      NoGradGuard guard;
      const Matrix a = enc({&obs}).value();
      const Matrix b = enc({&shuffled}).value();
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);

      // node states follow the relabelling
      const Matrix na = enc.node_states({&obs}).value();
      const Matrix nb = enc.node_states({&shuffled}).value();
      double worst = 0.0;
      for (std::size_t i = 0; i < perm.size(); ++i) {
        worst = std::max(worst, (nb.row(static_cast<Eigen::Index>(i)) - na.row(perm[i])).cwiseAbs().maxCoeff());
      }
      CHECK(worst <= 1e-10);
    }
  }
}

TEST_CASE("batched graphs encode independently") {
  const auto& spec = *fixture_spec();
  std::mt19937_64 init(2);
  const Encoder enc(EncoderKind::kElementGraph, spec, init, 16);
  const GridState s = default_state(spec);
  const EncodedObs a = observe(EncoderKind::kElementGraph, s, 0, 10);
  const EncodedObs b = observe(EncoderKind::kElementGraph, s, 3, 500);
  NoGradGuard guard;
  const Matrix both = enc({&a, &b}).value();
  CHECK((both.row(0) - enc({&a}).value()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((both.row(1) - enc({&b}).value()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("degenerate graphs") {
  const auto& spec = *fixture_spec();
  std::mt19937_64 init(3);
  const Encoder enc(EncoderKind::kSubstationGraph, spec, init, 8);
  NoGradGuard guard;

  EncodedObs empty;
  empty.kind = EncoderKind::kSubstationGraph;
  empty.graph.edge_x.resize(0, SubGraphObs::kEdgeFeatures);
  const Matrix z = enc({&empty}).value();
  REQUIRE(z.rows() == 1);
  CHECK(z.cols() == 8);
  CHECK(z.isZero(0.0));

  EncodedObs single = empty;
  single.graph.node_type = {0};
  single.graph.node_x = {Eigen::VectorXd::Constant(SubGraphObs::kNodeFeatures, 0.3)};
  const Matrix one = enc({&single}).value();
  CHECK(one.allFinite());
  CHECK(one.rows() == 1);

  EncodedObs wrong = single;
  wrong.kind = EncoderKind::kElementGraph;
  CHECK_THROWS_AS(enc({&wrong}), ContractError);
}

TEST_CASE("masked categorical") {
  SUBCASE("masked choice has probability zero") {
    const ActionLayout lay = small_layout({2});
    Matrix mask(1, 2);
    mask << 1, 0;
    const MaskedCategoricalSet d(Tensor(Matrix::Ones(1, 2)), mask, lay);
    CHECK(d.probs()(0, 0) == 1.0);
    CHECK(d.probs()(0, 1) == 0.0);
    CHECK(d.entropy().item() == 0.0);
  }
  SUBCASE("uniform logits give entropy ln k") {
    const ActionLayout lay = small_layout({6});
    for (int k = 1; k <= 6; ++k) {
      Matrix mask = Matrix::Zero(1, 6);
      mask.leftCols(k).setOnes();
      const MaskedCategoricalSet d(Tensor(Matrix::Constant(1, 6, 0.7)), mask, lay);
      CHECK(d.entropy().item() == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
    }
  }
  SUBCASE("joint log-prob by enumeration") {
    const ActionLayout lay = small_layout({3, 3});
    std::mt19937_64 rng(4);
    const Matrix logits = random_matrix(1, 6, rng, -2.0, 2.0);
    Matrix mask = Matrix::Ones(1, 6);
    mask(0, 4) = 0.0;
    const MaskedCategoricalSet d(Tensor(logits), mask, lay);
    double total = 0.0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double lp = d.log_prob({{a, b}}).item();
        if (b == 1) continue;  // masked
        double za = 0.0;
        for (int i = 0; i < 3; ++i) za += std::exp(logits(0, i));
        double zb = std::exp(logits(0, 3)) + std::exp(logits(0, 5));
        const double expected = logits(0, a) - std::log(za) + logits(0, 3 + b) - std::log(zb);
        CHECK(lp == doctest::Approx(expected).epsilon(1e-12));
        total += std::exp(lp);
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("samples never hit masked choices") {
    const ActionLayout lay = layout(*fixture_spec());
    std::mt19937_64 rng(6);
    std::bernoulli_distribution coin(0.5);
    Matrix mask(1, lay.total());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = coin(rng) ? 1.0 : 0.0;
    for (int e = 0; e < lay.n_elements(); ++e) mask(0, lay.offsets[e] + lay.do_nothing[e]) = 1.0;
    const MaskedCategoricalSet d(Tensor(random_matrix(1, lay.total(), rng, -3.0, 3.0)), mask, lay);
    std::vector<int> hits(static_cast<std::size_t>(lay.total()), 0);
    for (int n = 0; n < 100000; ++n) {
      const auto a = d.sample(0, rng);
      for (int e = 0; e < lay.n_elements(); ++e) ++hits[static_cast<std::size_t>(lay.offsets[e] + a[e])];
    }
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      if (mask(i) == 0.0) CHECK(hits[static_cast<std::size_t>(i)] == 0);
    }
  }
  SUBCASE("argmax breaks ties toward the lowest index") {
    const ActionLayout lay = small_layout({4});
    Matrix logits(1, 4);
    logits << 0.0, 2.0, 2.0, 1.0;
    CHECK(MaskedCategoricalSet(Tensor(logits), Matrix::Ones(1, 4), lay).argmax(0) == std::vector<int>{1});
    Matrix mask = Matrix::Ones(1, 4);
    mask(0, 1) = 0.0;
    CHECK(MaskedCategoricalSet(Tensor(logits), mask, lay).argmax(0) == std::vector<int>{2});
  }
  SUBCASE("extreme logits stay finite") {
    const ActionLayout lay = small_layout({3, 2});
    Matrix logits(2, 5);
    logits << 50, -50, 50, -50, 50, -50, -50, -50, 50, 50;
    Matrix mask = Matrix::Ones(2, 5);
    mask(0, 0) = 0.0;
    const MaskedCategoricalSet d(Tensor(logits), mask, lay);
    CHECK(d.log_probs().value().allFinite());
    CHECK(d.probs().allFinite());
    CHECK(d.entropy().value().allFinite());
    CHECK(d.log_prob({{1, 0}, {0, 1}}).value().allFinite());
  }
}

TEST_CASE("policy shapes and determinism") {
  const auto spec = fixture_spec();
  const ActionLayout lay = layout(*spec);
  for (auto kind : {EncoderKind::kFlat, EncoderKind::kSubstationGraph, EncoderKind::kElementGraph}) {
    const PolicyNetwork a(kind, *spec, 11, 16);
    const PolicyNetwork b(kind, *spec, 11, 16);
    CHECK(a.flat_parameters() == b.flat_parameters());
    CHECK(a.parameter_count() == static_cast<std::size_t>(a.flat_parameters().size()));
    const EncodedObs obs = observe(kind, default_state(*spec), 0, 0);
    NoGradGuard guard;
    const PolicyOutput out = a.forward({&obs, &obs});
    CHECK(out.logits.rows() == 2);
    CHECK(out.logits.cols() == lay.total());
    CHECK(out.value.cols() == 1);
    CHECK(out.logits.value().allFinite());
  }
}

TEST_CASE("policy gradients match finite differences") {
  const auto spec = fixture_spec();
  const ActionLayout lay = layout(*spec);
  std::mt19937_64 rng(12);
  for (auto kind : {EncoderKind::kFlat, EncoderKind::kSubstationGraph, EncoderKind::kElementGraph}) {
    CAPTURE(to_string(kind));
    const PolicyNetwork net(kind, *spec, 13, 6);
    const EncodedObs o1 = observe(kind, default_state(*spec), 1, 50);
    const EncodedObs o2 = observe(kind, gridrl::testing::random_topology(*spec, rng, 0.1), 4, 700);
    const Matrix w = random_matrix(2, lay.total(), rng);
    const Matrix wv = random_matrix(2, 1, rng);
    Matrix mask = Matrix::Ones(2, lay.total());
    mask(1, lay.offsets[5]) = 0.0;
    auto loss = [&] {
      const PolicyOutput out = net.forward({&o1, &o2});
      const MaskedCategoricalSet d(out.logits, mask, lay);
      return sum(d.log_probs() * Tensor(w)) + sum(out.value * Tensor(wv)) + scale(sum(d.entropy()), 0.3);
    };
    const auto g = grad_check(loss, net.parameters(), 1e-4, 24, 3);
    INFO(g.where);
    CHECK(g.worst < 1e-4);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto spec = fixture_spec();
  const PolicyNetwork net(EncoderKind::kFlat, *spec, 21, 16);
  const auto path = temp_file("flat.bin");
  save_checkpoint(path, net, 4242);

  const CheckpointHeader h = read_checkpoint_header(path);
  CHECK(h.version == kCheckpointVersion);
  CHECK(h.step == 4242);
  CHECK(h.schema_hash == net.schema_hash());
  CHECK(h.parameter_count == net.parameter_count());

  PolicyNetwork other(EncoderKind::kFlat, *spec, 99, 16);
  REQUIRE(other.flat_parameters() != net.flat_parameters());
  CHECK(load_checkpoint(path, other) == 4242);
  CHECK(other.flat_parameters() == net.flat_parameters());

  SUBCASE("other encoder refused") {
    PolicyNetwork graph(EncoderKind::kSubstationGraph, *spec, 21, 16);
    CHECK_THROWS_AS(load_checkpoint(path, graph), CheckpointError);
  }
  SUBCASE("other width refused") {
    PolicyNetwork wide(EncoderKind::kFlat, *spec, 21, 32);
    CHECK_THROWS_AS(load_checkpoint(path, wide), CheckpointError);
  }
  SUBCASE("truncated file refused") {
    const auto cut = temp_file("cut.bin");
    std::filesystem::copy_file(path, cut, std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(cut, std::filesystem::file_size(path) - 8);
    PolicyNetwork p(EncoderKind::kFlat, *spec, 21, 16);
    CHECK_THROWS_AS(load_checkpoint(cut, p), CheckpointError);
  }
  SUBCASE("bad magic refused") {
    const auto bad = temp_file("bad.bin");
    std::ofstream(bad, std::ios::binary) << "not a checkpoint at all, just text";
    CHECK_THROWS_AS(read_checkpoint_header(bad), CheckpointError);
  }
}

TEST_CASE("schema hash tracks layout and encoder") {
  const ActionLayout lay = layout(*fixture_spec());
  CHECK(schema_hash(lay, EncoderKind::kFlat) == schema_hash(lay, EncoderKind::kFlat));
  CHECK(schema_hash(lay, EncoderKind::kFlat) != schema_hash(lay, EncoderKind::kElementGraph));
  ActionLayout fewer = lay;
  fewer.dims.pop_back();
  CHECK(schema_hash(lay, EncoderKind::kFlat) != schema_hash(fewer, EncoderKind::kFlat));
}
