#include <doctest.h>

#include <random>

#include "gradcheck.hpp"
#include "gridrl/nn/layers.hpp"
#include "gridrl/nn/tensor.hpp"

using namespace gridrl::nn;
using gridrl::testing::away_from;
using gridrl::testing::grad_check;
using gridrl::testing::random_matrix;

namespace {

constexpr double kTol = 1e-4;

// sum(t * R) for a fixed random R, so every output entry gets its own weight.
Tensor weighted(const Tensor& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(t * Tensor(random_matrix(t.rows(), t.cols(), rng)));
}

void expect_close(const gridrl::testing::GradCheck& g) {
  INFO(g.where);
  CHECK(g.compared > 0);
  CHECK(g.worst < kTol);
}

}  // namespace

TEST_CASE("linear loss has the outer-product gradient") {
  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(1, 4, rng);
  Tensor w = Tensor::parameter(random_matrix(4, 3, rng));
  backward(sum(matmul(Tensor(x), w)));
  const Matrix expected = x.transpose() * Matrix::Ones(1, 3);
  CHECK((w.grad() - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("parameter off the tape gets a zero gradient") {
  std::mt19937_64 rng(2);
  Tensor used = Tensor::parameter(random_matrix(2, 2, rng));
  Tensor unused = Tensor::parameter(random_matrix(2, 2, rng));
  backward(sum(square(used)));
  CHECK(used.has_grad());
  CHECK_FALSE(unused.has_grad());
  CHECK(unused.grad() == Matrix::Zero(2, 2));
}

TEST_CASE("no-grad guard records nothing") {
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2));
  Tensor y;
  {
    NoGradGuard guard;
    y = sum(tanh(p));
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
  const Tensor z = sum(tanh(p));
  CHECK(z.requires_grad());
}

TEST_CASE("backward needs a scalar") {
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(backward(tanh(p)), ContractError);
}

TEST_CASE("gradients accumulate until cleared") {
  Tensor p = Tensor::parameter(Matrix::Constant(1, 1, 3.0));
  backward(square(p));
  backward(square(p));
  CHECK(p.grad()(0, 0) == doctest::Approx(12.0));
  p.zero_grad();
  backward(square(p));
  CHECK(p.grad()(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("elementwise and matrix primitives") {
  std::mt19937_64 rng(3);
  Tensor a = Tensor::parameter(random_matrix(3, 4, rng));
  Tensor b = Tensor::parameter(random_matrix(3, 4, rng));
  Tensor m = Tensor::parameter(random_matrix(4, 2, rng));
  Tensor row = Tensor::parameter(random_matrix(1, 4, rng));
  Tensor pos = Tensor::parameter(random_matrix(3, 4, rng, 0.5, 2.0));

  SUBCASE("matmul") { expect_close(grad_check([&] { return weighted(matmul(a, m), 1); }, {a, m})); }
  SUBCASE("add") { expect_close(grad_check([&] { return weighted(a + b, 2); }, {a, b})); }
  SUBCASE("sub") { expect_close(grad_check([&] { return weighted(a - b, 3); }, {a, b})); }
  SUBCASE("mul") { expect_close(grad_check([&] { return weighted(a * b, 4); }, {a, b})); }
  SUBCASE("scale") { expect_close(grad_check([&] { return weighted(scale(a, -2.5), 5); }, {a})); }
  SUBCASE("add_scalar") { expect_close(grad_check([&] { return weighted(add_scalar(a, 0.7), 6); }, {a})); }
  SUBCASE("add_row") { expect_close(grad_check([&] { return weighted(add_row(a, row), 7); }, {a, row})); }
  SUBCASE("tanh") { expect_close(grad_check([&] { return weighted(tanh(a), 8); }, {a})); }
  SUBCASE("exp") { expect_close(grad_check([&] { return weighted(exp(a), 9); }, {a})); }
  SUBCASE("log") { expect_close(grad_check([&] { return weighted(log(pos), 10); }, {pos})); }
  SUBCASE("square") { expect_close(grad_check([&] { return weighted(square(a), 11); }, {a})); }
  SUBCASE("sum") { expect_close(grad_check([&] { return scale(sum(a), 3.0); }, {a})); }
  SUBCASE("mean") { expect_close(grad_check([&] { return square(mean(a)); }, {a})); }
  SUBCASE("row_sum") { expect_close(grad_check([&] { return weighted(row_sum(a), 12); }, {a})); }
}

TEST_CASE("kinked primitives away from their kinks") {
  std::mt19937_64 rng(4);
  Tensor a = Tensor::parameter(away_from(random_matrix(3, 4, rng), {0.0}, 1e-3));
  SUBCASE("relu") { expect_close(grad_check([&] { return weighted(relu(a), 13); }, {a})); }
  SUBCASE("clamp") {
    Tensor c = Tensor::parameter(away_from(random_matrix(3, 4, rng), {-0.3, 0.4}, 1e-3));
    expect_close(grad_check([&] { return weighted(clamp(c, -0.3, 0.4), 14); }, {c}));
  }
  SUBCASE("minimum") {
    Matrix x = random_matrix(3, 4, rng);
    Matrix y = x + away_from(random_matrix(3, 4, rng), {0.0}, 1e-2);
    Tensor p = Tensor::parameter(x);
    Tensor q = Tensor::parameter(y);
    expect_close(grad_check([&] { return weighted(minimum(p, q), 15); }, {p, q}));
  }
}

TEST_CASE("minimum routes ties to the first argument") {
  Tensor p = Tensor::parameter(Matrix::Constant(1, 1, 2.0));
  Tensor q = Tensor::parameter(Matrix::Constant(1, 1, 2.0));
  backward(sum(minimum(p, q)));
  CHECK(p.grad()(0, 0) == 1.0);
  CHECK(q.grad()(0, 0) == 0.0);
}

TEST_CASE("row routing primitives") {
  std::mt19937_64 rng(5);
  Tensor a = Tensor::parameter(random_matrix(5, 3, rng));
  SUBCASE("gather_rows with repeats") {
    expect_close(grad_check([&] { return weighted(gather_rows(a, {4, 0, 0, 2}), 16); }, {a}));
  }
  SUBCASE("scatter_rows") {
    expect_close(grad_check([&] { return weighted(scatter_rows(a, {1, 1, 0, 3, 1}, 4), 17); }, {a}));
  }
  SUBCASE("segment_mean with an empty segment") {
    const Tensor out = segment_mean(a, {0, 2, 0, 2, 2}, 3);
    CHECK(out.value().row(1) == Matrix::Zero(1, 3));
    CHECK((out.value().row(0) - (a.value().row(0) + a.value().row(2)) / 2.0).norm() < 1e-15);
    expect_close(grad_check([&] { return weighted(segment_mean(a, {0, 2, 0, 2, 2}, 3), 18); }, {a}));
  }
}

TEST_CASE("masked log-softmax") {
  std::mt19937_64 rng(6);
  Tensor logits = Tensor::parameter(random_matrix(3, 7, rng, -3, 3));
  Matrix mask = Matrix::Ones(3, 7);
  mask(0, 1) = 0;
  mask(1, 4) = 0;
  mask(1, 6) = 0;
  mask(2, 0) = 0;
  const std::vector<int> offsets{0, 3};
  const std::vector<int> dims{3, 4};
  const Tensor lp = masked_log_softmax(logits, mask, offsets, dims);
  for (Eigen::Index r = 0; r < 3; ++r) {
    for (int g = 0; g < 2; ++g) {
      double total = 0.0;
      for (int c = 0; c < dims[g]; ++c) {
        const int col = offsets[g] + c;
        if (mask(r, col) == 0.0) {
          CHECK(lp.value()(r, col) == 0.0);
        } else {
          total += std::exp(lp.value()(r, col));
        }
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  expect_close(grad_check([&] { return weighted(masked_log_softmax(logits, mask, offsets, dims), 19); }, {logits}));

  backward(sum(masked_log_softmax(logits, mask, offsets, dims)));
  CHECK(logits.grad()(0, 1) == 0.0);

  Matrix dead = mask;
  dead.block(2, 3, 1, 4).setZero();
  CHECK_THROWS_AS(masked_log_softmax(logits, dead, offsets, dims), ContractError);
}

TEST_CASE("masked log-softmax stays finite on extreme logits") {
  Matrix l(1, 4);
  l << -50, 50, 50, -50;
  Matrix mask = Matrix::Ones(1, 4);
  mask(0, 1) = 0;
  const Tensor lp = masked_log_softmax(Tensor(l), mask, {0}, {4});
  CHECK(lp.value().allFinite());
  CHECK(std::exp(lp.value()(0, 2)) == doctest::Approx(1.0));
}

TEST_CASE("graph attention") {
  std::mt19937_64 rng(7);
  const int n = 4;
  Tensor q = Tensor::parameter(random_matrix(n, 3, rng));
  Tensor k = Tensor::parameter(random_matrix(n, 3, rng));
  Tensor v = Tensor::parameter(random_matrix(n, 3, rng));
  const std::vector<int> dst{0, 1, 1, 2, 0, 1, 2, 3, 3};
  const std::vector<int> src{1, 0, 2, 1, 0, 1, 2, 3, 0};
  Tensor bias = Tensor::parameter(random_matrix(static_cast<Eigen::Index>(dst.size()), 1, rng));
  expect_close(grad_check([&] { return weighted(graph_attention(q, k, v, bias, dst, src), 20); }, {q, k, v, bias}));

  SUBCASE("single incoming edge copies its source value") {
    const Tensor out = graph_attention(q, k, v, Tensor(Matrix::Zero(4, 1)), {0, 1, 2, 3}, {2, 1, 2, 3});
    CHECK((out.value().row(0) - v.value().row(2)).norm() < 1e-15);
  }
  SUBCASE("scores follow the scaled dot product") {
    const Tensor out = graph_attention(q, k, v, bias, dst, src);
    // node 0 attends to 1 and 0
    const double s1 = q.value().row(0).dot(k.value().row(1)) / std::sqrt(3.0) + bias.value()(0, 0);
    const double s0 = q.value().row(0).dot(k.value().row(0)) / std::sqrt(3.0) + bias.value()(4, 0);
    const double w1 = std::exp(s1) / (std::exp(s0) + std::exp(s1));
    const Matrix expected = w1 * v.value().row(1) + (1 - w1) * v.value().row(0);
    CHECK((out.value().row(0) - expected).norm() < 1e-12);
  }
}

TEST_CASE("two-layer network against finite differences") {
  std::mt19937_64 rng(8);
  Linear l1(6, 5, rng);
  Linear l2(5, 3, rng);
  const Tensor x(random_matrix(4, 6, rng));
  std::vector<Tensor> params;
  l1.collect(params);
  l2.collect(params);
  expect_close(grad_check([&] { return weighted(l2(tanh(l1(x))), 21); }, params, 1e-5, 1000));
}

TEST_CASE("xavier bounds") {
  std::mt19937_64 rng(9);
  const Matrix w = xavier_uniform(30, 50, rng);
  const double bound = std::sqrt(6.0 / 80.0);
  CHECK(w.cwiseAbs().maxCoeff() <= bound);
  CHECK(w.cwiseAbs().maxCoeff() > 0.9 * bound);
  CHECK(std::abs(w.mean()) < 0.05);
}

TEST_CASE("gradient clipping") {
  Tensor a = Tensor::parameter(Matrix::Zero(1, 2));
  Tensor b = Tensor::parameter(Matrix::Zero(1, 1));
  a.node()->grad = (Matrix(1, 2) << 3.0, 0.0).finished();
  b.node()->grad = Matrix::Constant(1, 1, 4.0);
  CHECK(clip_grad_norm({a, b}, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad()(0, 0) == doctest::Approx(0.6));
  CHECK(b.grad()(0, 0) == doctest::Approx(0.8));
  CHECK(clip_grad_norm({a, b}, 10.0) == doctest::Approx(1.0));
  CHECK(a.grad()(0, 0) == doctest::Approx(0.6));
}

TEST_CASE("adam first step moves by the learning rate") {
  Tensor p = Tensor::parameter(Matrix::Constant(1, 2, 1.0));
  Adam adam({p}, 0.1);
  p.node()->grad = (Matrix(1, 2) << 2.0, -0.5).finished();
  adam.step();
  CHECK(p.value()(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.value()(0, 1) == doctest::Approx(1.1).epsilon(1e-6));
  CHECK(adam.steps() == 1);

  // minimizes a quadratic
  Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 5.0));
  Adam opt({x}, 0.05);
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    backward(square(add_scalar(x, -2.0)));
    opt.step();
  }
  CHECK(x.value()(0, 0) == doctest::Approx(2.0).epsilon(1e-3));
}
