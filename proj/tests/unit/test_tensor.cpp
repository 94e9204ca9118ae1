#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "gcnv/error.hpp"
#include "gcnv/tensor/gradcheck.hpp"
#include "gcnv/tensor/ops.hpp"
#include "gcnv/tensor/random.hpp"
#include "gcnv/tensor/tape.hpp"

using namespace gcnv;

namespace {

// Contracts an arbitrary output with fixed random weights so every output
// coordinate contributes to the scalar.
Tensor contract(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, rng.uniform_tensor(y.shape(), -1.0, 1.0)));
}

void expect_grad_ok(const ScalarFunction& f, std::vector<Tensor> points, double tol = 1e-4) {
  auto report = finite_diff_check(f, points, tol);
  EXPECT_TRUE(report.passed) << report.summary();
}

}  // namespace

TEST(Tape, SquareAtThree) {
  Tape tape;
  Tensor x = tape.leaf(Tensor::scalar(3.0));
  Tensor y = mul(x, x);
  EXPECT_EQ(y.item(), 9.0);
  auto g = backward(y);
  EXPECT_EQ(g.of(x).item(), 6.0);
}

TEST(Tape, SumGivesOnes) {
  Tape tape;
  Tensor x = tape.leaf(Tensor::vector({1, 2, 3, 4, 5}));
  auto g = backward(sum(x));
  for (double v : g.of(x).values()) EXPECT_EQ(v, 1.0);
}

TEST(Tape, ConstantOutputHasNoGradients) {
  Tensor y = sum(Tensor::vector({1, 2}));
  EXPECT_FALSE(y.tracked());
  EXPECT_TRUE(backward(y).empty());
}

TEST(Tape, SigmoidSlopeAtZero) {
  Tape tape;
  Tensor x = tape.leaf(Tensor::scalar(0.0));
  auto g = backward(sum(sigmoid(x)));
  EXPECT_DOUBLE_EQ(g.of(x).item(), 0.25);
}

TEST(Tape, UntouchedLeafGetsZero) {
  Tape tape;
  Tensor x = tape.leaf(Tensor::vector({1, 2}));
  Tensor unused = tape.leaf(Tensor::vector({7, 8, 9}));
  auto g = backward(sum(x));
  ASSERT_EQ(g.size(), 2u);
  for (double v : g.of(unused).values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.of(unused).shape(), (Shape{3}));
}

TEST(Tape, NonScalarBackwardFails) {
  Tape tape;
  Tensor x = tape.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(backward(scale(x, 2.0)), Error);
}

TEST(Tape, MixedTapesRejected) {
  Tape a, b;
  Tensor x = a.leaf(Tensor::scalar(1.0));
  Tensor y = b.leaf(Tensor::scalar(2.0));
  EXPECT_THROW(add(x, y), Error);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
  try {
    add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2}));
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[3, 2]"), std::string::npos);
  }
}

TEST(Ops, NonFiniteInputRejected) {
  Tensor bad = Tensor::vector({1.0, std::nan("")});
  try {
    sigmoid(bad);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
  EXPECT_THROW(matmul(Tensor::matrix(1, 1, {INFINITY}), Tensor::matrix(1, 1, {1.0})), Error);
}

TEST(Ops, UniformSoftmax) {
  Tensor y = softmax(Tensor::vector({0, 0, 0}));
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Ops, SoftmaxNormalizedAndShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = rng.uniform_tensor({4, 7}, -2, 2);
    Tensor y = softmax(x);
    Tensor ys = softmax(add_scalar(x, rng.uniform(-50, 50)));
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        s += y.at(r, j);
        EXPECT_NEAR(y.at(r, j), ys.at(r, j), 1e-12);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Ops, ConvOfZeroIsBitExactZero) {
  Rng rng(5);
  Tensor x = Tensor::zeros({5, 4, 6, 2});
  Tensor w = rng.uniform_tensor({3, 3, 3, 2, 4}, -1, 1);
  for (std::size_t pad : {0u, 1u}) {
    Tensor y = conv3d(x, w, 1, pad);
    for (double v : y.values()) EXPECT_EQ(std::bit_cast<std::uint64_t>(v), 0u);
  }
}

TEST(Ops, ConvMatchesDirectLoopsWithPadding) {
  Rng rng(21);
  Tensor x = rng.uniform_tensor({4, 3, 5, 2}, -1, 1);
  Tensor w = rng.uniform_tensor({3, 3, 3, 2, 3}, -1, 1);
  Tensor y = conv3d(x, w, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 2, 3, 3}));
  auto xat = [&](long a, long b, long c, long ci) -> double {
    if (a < 0 || b < 0 || c < 0 || a >= 4 || b >= 3 || c >= 5) return 0.0;
    return x[((a * 3 + b) * 5 + c) * 2 + ci];
  };
  for (long ox = 0; ox < 2; ++ox)
    for (long oy = 0; oy < 2; ++oy)
      for (long oz = 0; oz < 3; ++oz)
        for (long co = 0; co < 3; ++co) {
          double acc = 0.0;
          for (long dx = 0; dx < 3; ++dx)
            for (long dy = 0; dy < 3; ++dy)
              for (long dz = 0; dz < 3; ++dz)
                for (long ci = 0; ci < 2; ++ci)
                  acc += xat(ox * 2 + dx - 1, oy * 2 + dy - 1, oz * 2 + dz - 1, ci) *
                         w[(((dx * 3 + dy) * 3 + dz) * 2 + ci) * 3 + co];
          EXPECT_NEAR(y[((ox * 2 + oy) * 3 + oz) * 3 + co], acc, 1e-12);
        }
}

TEST(Ops, EvaluationIsBitDeterministic) {
  auto run = [] {
    Rng rng(3);
    Tensor a = rng.uniform_tensor({6, 5}, -2, 2);
    Tensor b = rng.uniform_tensor({5, 4}, -2, 2);
    return softmax(layer_norm(matmul(a, b), Tensor::full({4}, 1.0), Tensor::zeros({4})));
  };
  Tensor y1 = run(), y2 = run();
  for (std::size_t i = 0; i < y1.numel(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(y1[i]), std::bit_cast<std::uint64_t>(y2[i]));
}

TEST(Gradients, EveryPrimitiveMatchesFiniteDifferences) {
  Rng rng(2024);
  auto r = [&](Shape s, double lo = -2, double hi = 2) { return rng.uniform_tensor(std::move(s), lo, hi); };

  expect_grad_ok([](auto x) { return contract(add(x[0], x[1]), 1); }, {r({3, 4}), r({3, 4})});
  expect_grad_ok([](auto x) { return contract(sub(x[0], x[1]), 2); }, {r({3, 4}), r({3, 4})});
  expect_grad_ok([](auto x) { return contract(mul(x[0], x[1]), 3); }, {r({3, 4}), r({3, 4})});
  expect_grad_ok([](auto x) { return contract(div(x[0], x[1]), 4); }, {r({3, 4}), r({3, 4}, 0.5, 2)});
  expect_grad_ok([](auto x) { return contract(scale(x[0], -1.7), 5); }, {r({5})});
  expect_grad_ok([](auto x) { return contract(add_scalar(x[0], 0.3), 6); }, {r({5})});
  expect_grad_ok([](auto x) { return contract(add_rowvec(x[0], x[1]), 7); }, {r({3, 4}), r({4})});
  expect_grad_ok([](auto x) { return contract(sigmoid(x[0]), 8); }, {r({2, 5})});
  expect_grad_ok([](auto x) { return contract(gelu(x[0]), 9); }, {r({2, 5})});
  expect_grad_ok([](auto x) { return contract(exp(x[0]), 10); }, {r({2, 5})});
  expect_grad_ok([](auto x) { return contract(log(x[0]), 11); }, {r({2, 5}, 0.5, 2)});
  expect_grad_ok([](auto x) { return contract(matmul(x[0], x[1]), 12); }, {r({3, 4}), r({4, 2})});
  expect_grad_ok([](auto x) { return contract(transpose(x[0]), 13); }, {r({3, 4})});
  expect_grad_ok([](auto x) { return contract(reshape(x[0], {6, 2}), 14); }, {r({3, 4})});
  expect_grad_ok([](auto x) { return mean(mul(x[0], x[0])); }, {r({3, 4})});
  expect_grad_ok([](auto x) { return contract(sum_rows(x[0]), 15); }, {r({3, 4})});
  expect_grad_ok([](auto x) { return contract(max_rows(x[0]), 16); }, {r({5, 4})});
  expect_grad_ok([](auto x) { return contract(softmax(x[0]), 17); }, {r({3, 5})});
  expect_grad_ok([](auto x) { return contract(log_softmax(x[0]), 18); }, {r({3, 5})});
  expect_grad_ok([](auto x) { return contract(layer_norm(x[0], x[1], x[2]), 19); }, {r({3, 6}), r({6}), r({6})});
  expect_grad_ok([](auto x) { return contract(lp_norm_rows(x[0], 2), 20); }, {r({4, 5})});
  expect_grad_ok([](auto x) { return contract(lp_norm_rows(x[0], 1), 21); }, {r({4, 5})});
  expect_grad_ok([](auto x) { return contract(lp_norm_rows(x[0], 3), 22); }, {r({4, 5})});
  const std::vector<std::size_t> rows{2, 0, 2, 1};
  expect_grad_ok([&](auto x) { return contract(gather_rows(x[0], rows), 23); }, {r({3, 4})});
  expect_grad_ok([&](auto x) { return contract(scatter_rows(x[0], rows, 5), 24); }, {r({4, 3})});
  expect_grad_ok([](auto x) { return contract(concat_rows(x), 25); }, {r({2, 3}), r({1, 3}), r({3, 3})});
  expect_grad_ok([](auto x) { return contract(slice_cols(x[0], 1, 4), 26); }, {r({3, 5})});
  expect_grad_ok([](auto x) { return contract(concat_cols(x), 27); }, {r({3, 2}), r({3, 1})});
  expect_grad_ok([](auto x) { return contract(conv3d(x[0], x[1], 2, 1), 28); }, {r({4, 3, 4, 2}), r({3, 3, 3, 2, 2})});
  expect_grad_ok([](auto x) { return contract(conv3d(x[0], x[1], 2, 0), 29); }, {r({4, 4, 4, 1}), r({2, 2, 2, 1, 3})});

  Rulebook rb;
  rb.kernel_volume = 2;
  rb.in_rows = 3;
  rb.out_rows = 2;
  rb.pairs = {{{0, 0}, {1, 1}}, {{2, 0}, {1, 0}}};
  expect_grad_ok([&](auto x) { return contract(sparse_conv(x[0], rb, x[1]), 30); }, {r({3, 2}), r({2, 2, 3})});
}

TEST(Gradients, TwoLayerMlpMatchesFiniteDifferences) {
  Rng rng(99);
  Tensor x = rng.uniform_tensor({1, 4}, -2, 2);
  std::vector<Tensor> params{rng.uniform_tensor({4, 6}, -1, 1), rng.uniform_tensor({6}, -1, 1),
                             rng.uniform_tensor({6, 3}, -1, 1), rng.uniform_tensor({3}, -1, 1), x};
  auto f = [](std::span<const Tensor> p) {
    Tensor h = gelu(add_rowvec(matmul(p[4], p[0]), p[1]));
    Tensor y = add_rowvec(matmul(h, p[2]), p[3]);
    return sum(mul(y, y));
  };
  auto report = finite_diff_check(f, params, 1e-4);
  EXPECT_TRUE(report.passed) << report.summary();
}

TEST(GradCheck, LinearIsExact) {
  auto report = finite_diff_check([](const Tensor& x) { return sum(scale(x, 3.0)); }, Tensor::vector({0.7, -1.2}), 1e-10);
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_LE(report.worst_relative_error, 1e-10);
}

TEST(GradCheck, CentralDifferenceIsSecondOrder) {
  auto cube = [](const Tensor& x) { return sum(mul(x, mul(x, x))); };
  const double h = 1e-3;
  auto r1 = finite_diff_check(cube, Tensor::scalar(1.0), 1.0, h);
  auto r2 = finite_diff_check(cube, Tensor::scalar(1.0), 1.0, h / 2);
  const double e1 = std::abs(r1.coordinates[0].numeric - 3.0);
  const double e2 = std::abs(r2.coordinates[0].numeric - 3.0);
  EXPECT_NEAR(e1 / e2, 4.0, 0.1);
}

TEST(GradCheck, FivePointStencil) {
  // Exact (up to roundoff) for polynomials of degree <= 4; fourth order beyond.
  auto quartic = [](const Tensor& x) { return sum(mul(mul(x, x), mul(x, x))); };
  auto r = finite_diff_check(quartic, Tensor::scalar(1.0), 1.0, 0.1, 4);
  EXPECT_NEAR(r.coordinates[0].numeric, 4.0, 1e-12);
  auto quintic = [](const Tensor& x) { return sum(mul(x, mul(mul(x, x), mul(x, x)))); };
  auto r1 = finite_diff_check(quintic, Tensor::scalar(1.0), 1.0, 2e-2, 4);
  auto r2 = finite_diff_check(quintic, Tensor::scalar(1.0), 1.0, 1e-2, 4);
  EXPECT_NEAR(std::abs(r1.coordinates[0].numeric - 5.0) / std::abs(r2.coordinates[0].numeric - 5.0), 16.0, 0.5);
  EXPECT_THROW(finite_diff_check(quartic, Tensor::scalar(1.0), 1.0, 0.1, 3), Error);
}

TEST(GradCheck, DetectsWrongGradient) {
  // floor-like step via a constant-valued shortcut: the tape sees slope 0 but the function varies.
  auto f = [](std::span<const Tensor> x) {
    const double v = x[0].item();
    return add_scalar(scale(x[0], 0.0), v * v);
  };
  const Tensor points[] = {Tensor::scalar(1.5)};
  auto report = finite_diff_check(f, points, 1e-4);
  EXPECT_FALSE(report.passed);
}

TEST(GradCheck, NonFiniteProbeIdentifiesCoordinate) {
  auto f = [](std::span<const Tensor> x) { return sum(log(x[0])); };
  const Tensor points[] = {Tensor::vector({1.0, 5e-6})};
  try {
    finite_diff_check(f, points, 1e-4);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos) << e.what();
  }
}
