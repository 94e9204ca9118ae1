#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>

#include "../support/oracles.hpp"
#include "gcnv/error.hpp"
#include "gcnv/metrics/metrics.hpp"
#include "gcnv/metrics/qea.hpp"
#include "gcnv/metrics/wilcoxon.hpp"
#include "gcnv/tensor/random.hpp"

using namespace gcnv;

namespace {

BinaryMask box(Extents e, std::array<std::size_t, 3> lo, std::array<std::size_t, 3> hi) {
  BinaryMask m{e, std::vector<std::uint8_t>(e[0] * e[1] * e[2], 0)};
  for (std::size_t x = lo[0]; x < hi[0]; ++x)
    for (std::size_t y = lo[1]; y < hi[1]; ++y)
      for (std::size_t z = lo[2]; z < hi[2]; ++z) m.bits[(x * e[1] + y) * e[2] + z] = 1;
  return m;
}

BinaryMask random_mask(Rng& rng, Extents e, double density) {
  BinaryMask m{e, std::vector<std::uint8_t>(e[0] * e[1] * e[2])};
  for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
  return m;
}

BinaryMask ensure_nonempty(BinaryMask m, Rng& rng) {
  if (m.count() == 0) m.bits[rng.below(m.bits.size())] = 1;
  return m;
}

}  // namespace

TEST(Overlap, IdenticalAndDisjoint) {
  const Extents e{4, 4, 4};
  const auto a = box(e, {0, 0, 0}, {2, 2, 2});
  const auto same = overlap_metrics(a, a);
  EXPECT_EQ(same.dice, 1.0);
  EXPECT_EQ(same.iou, 1.0);
  const auto far = overlap_metrics(a, box(e, {2, 2, 2}, {4, 4, 4}));
  EXPECT_EQ(far.dice, 0.0);
  EXPECT_EQ(far.iou, 0.0);
}

TEST(Overlap, TwoTwoOne) {
  BinaryMask a{{1, 1, 3}, {1, 1, 0}}, b{{1, 1, 3}, {0, 1, 1}};
  const auto s = overlap_metrics(a, b);
  EXPECT_DOUBLE_EQ(s.dice, 0.5);
  EXPECT_DOUBLE_EQ(s.iou, 1.0 / 3.0);
}

TEST(Overlap, BothEmptyIsOne) {
  BinaryMask a{{2, 2, 2}, std::vector<std::uint8_t>(8, 0)};
  const auto s = overlap_metrics(a, a);
  EXPECT_EQ(s.dice, 1.0);
  EXPECT_EQ(s.iou, 1.0);
}

TEST(Overlap, ExtentMismatchThrows) {
  BinaryMask a{{2, 2, 2}, std::vector<std::uint8_t>(8, 1)}, b{{2, 2, 1}, std::vector<std::uint8_t>(4, 1)};
  try {
    overlap_metrics(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(Overlap, DiceIouIdentityAndSymmetry) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = ensure_nonempty(random_mask(rng, {5, 4, 3}, 0.4), rng);
    const auto b = random_mask(rng, {5, 4, 3}, 0.4);
    const auto s = overlap_metrics(a, b), t = overlap_metrics(b, a);
    EXPECT_EQ(s.dice, t.dice);
    EXPECT_EQ(s.iou, t.iou);
    EXPECT_NEAR(s.dice, 2.0 * s.iou / (1.0 + s.iou), 1e-12);
    EXPECT_LE(s.iou, s.dice);
  }
}

TEST(Surface, IdenticalMasks) {
  const auto a = box({6, 6, 6}, {1, 1, 1}, {5, 4, 5});
  const auto s = surface_metrics(a, a);
  EXPECT_EQ(s.hd95, 0.0);
  EXPECT_EQ(s.nsd, 1.0);
}

TEST(Surface, ShiftedCube) {
  const Extents e{8, 8, 8};
  const auto a = box(e, {2, 2, 2}, {5, 5, 5}), b = box(e, {3, 2, 2}, {6, 5, 5});
  EXPECT_DOUBLE_EQ(surface_metrics(a, b).hd95, 1.0);
  const auto o = oracle::brute_surface(e, a.bits, b.bits, 1.0);
  EXPECT_DOUBLE_EQ(o.hd95, 1.0);
}

TEST(Surface, SurfaceOfSolidBoxSkipsInterior) {
  const auto a = box({5, 5, 5}, {0, 0, 0}, {5, 5, 5});
  EXPECT_EQ(surface_of(a).count(), 125u - 27u);
}

TEST(Surface, EmptyMaskThrows) {
  const auto a = box({3, 3, 3}, {0, 0, 0}, {1, 1, 1});
  BinaryMask empty{{3, 3, 3}, std::vector<std::uint8_t>(27, 0)};
  try {
    surface_metrics(a, empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
  }
}

TEST(Surface, DistanceTransformMatchesBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Extents e{1 + rng.below(7), 1 + rng.below(7), 1 + rng.below(7)};
    const auto m = ensure_nonempty(random_mask(rng, e, 0.1), rng);
    const auto dist = distance_to(m);
    const auto cells = oracle::cells_of(e, m.bits);
    std::size_t i = 0;
    for (long x = 0; x < static_cast<long>(e[0]); ++x)
      for (long y = 0; y < static_cast<long>(e[1]); ++y)
        for (long z = 0; z < static_cast<long>(e[2]); ++z, ++i)
          EXPECT_NEAR(dist[i], oracle::nearest({x, y, z}, cells), 1e-12);
  }
}

TEST(Surface, RandomPairsMatchBruteForce) {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const Extents e{2 + rng.below(7), 2 + rng.below(7), 2 + rng.below(7)};
    const auto a = ensure_nonempty(random_mask(rng, e, rng.uniform(0.05, 0.7)), rng);
    const auto b = ensure_nonempty(random_mask(rng, e, rng.uniform(0.05, 0.7)), rng);
    const double tol = rng.uniform(0.0, 2.5);
    const auto s = surface_metrics(a, b, tol);
    const auto o = oracle::brute_surface(e, a.bits, b.bits, tol);
    EXPECT_NEAR(s.hd95, o.hd95, 1e-9);
    EXPECT_NEAR(s.nsd, o.nsd, 1e-12);
    const auto r = surface_metrics(b, a, tol);
    EXPECT_NEAR(r.hd95, s.hd95, 1e-12);
    EXPECT_NEAR(r.nsd, s.nsd, 1e-12);
  }
}

TEST(Surface, LargeToleranceGivesFullNsd) {
  Rng rng(19);
  const Extents e{6, 6, 6};
  const auto a = ensure_nonempty(random_mask(rng, e, 0.2), rng), b = ensure_nonempty(random_mask(rng, e, 0.2), rng);
  EXPECT_EQ(surface_metrics(a, b, std::sqrt(3.0) * 6).nsd, 1.0);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({0, 1, 2, 3, 4}, 95), 3.8);
  EXPECT_DOUBLE_EQ(percentile({5}, 95), 5.0);
  EXPECT_DOUBLE_EQ(percentile({3, 1, 2}, 50), 2.0);
}

TEST(Evaluate, PerClassAndMeans) {
  const Extents e{4, 4, 1};
  std::vector<int> truth(16, 0), pred(16, 0);
  for (int i = 0; i < 4; ++i) truth[i] = pred[i] = 1;   // class 1 perfect
  truth[8] = 2;                                         // class 2 missed
  const auto r = evaluate_segmentation(e, pred, truth, 3);
  ASSERT_EQ(r.classes.size(), 2u);
  EXPECT_EQ(r.classes[0].dice, 1.0);
  EXPECT_EQ(r.classes[0].hd95, 0.0);
  EXPECT_EQ(r.classes[1].dice, 0.0);
  EXPECT_TRUE(std::isnan(r.classes[1].hd95));
  EXPECT_DOUBLE_EQ(r.mean_dice, 0.5);
  EXPECT_EQ(r.mean_hd95, 0.0);
  EXPECT_NE(r.to_json().find("\"hd95\": null"), std::string::npos);
}

TEST(Qea, AllOnesSquare) {
  EXPECT_NEAR(polygon_area({1, 1, 1, 1}), 2.0, 1e-15);
  for (std::size_t k = 3; k < 9; ++k) {
    EXPECT_NEAR(polygon_area(std::vector<double>(k, 1.0)), 0.5 * k * std::sin(2 * std::numbers::pi / k), 1e-14);
  }
}

TEST(Qea, ThreeMethodFixture) {
  // Axes: dice (higher), hd95 (lower), flops (lower), nsd (higher).
  PolygonSpec spec;
  spec.axes = {{"dice", AxisDirection::HigherBetter},
               {"hd95", AxisDirection::LowerBetter},
               {"flops", AxisDirection::LowerBetter},
               {"nsd", AxisDirection::HigherBetter}};
  spec.methods = {"A", "B", "C"};
  spec.values = {{0.90, 2.0, 10.0, 0.80}, {0.80, 4.0, 5.0, 0.90}, {0.85, 3.0, 20.0, 0.70}};
  const auto r = qea(spec);
  // Radii by hand: A (1, 1, 2/3, 1/2), B (0, 0, 1, 1), C (1/2, 1/2, 0, 0).
  const std::vector<std::vector<double>> radii = {{1, 1, 2.0 / 3, 0.5}, {0, 0, 1, 1}, {0.5, 0.5, 0, 0}};
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t a = 0; a < 4; ++a) EXPECT_NEAR(r.radii[m][a], radii[m][a], 1e-12);
  // sin(pi/2) = 1: A = (1 + 2/3 + 1/3 + 1/2)/2 = 5/4; B = (0 + 0 + 1 + 0)/2; C = (1/4)/2.
  EXPECT_NEAR(r.areas[0], 1.25, 1e-12);
  EXPECT_NEAR(r.areas[1], 0.5, 1e-12);
  EXPECT_NEAR(r.areas[2], 0.125, 1e-12);
}

TEST(Qea, BestEverywhereAndRange) {
  PolygonSpec spec;
  spec.axes = {{"a", AxisDirection::HigherBetter}, {"b", AxisDirection::LowerBetter}, {"c", AxisDirection::HigherBetter}};
  spec.methods = {"best", "x", "y"};
  spec.values = {{9, 1, 9}, {3, 5, 2}, {1, 4, 8}};
  const auto r = qea(spec);
  for (double v : r.radii[0]) EXPECT_EQ(v, 1.0);
  EXPECT_NEAR(r.areas[0], 1.5 * std::sin(2 * std::numbers::pi / 3), 1e-14);
  for (const auto& row : r.radii)
    for (double v : row) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(Qea, DegenerateAxisNamed) {
  PolygonSpec spec;
  spec.axes = {{"a", AxisDirection::HigherBetter}, {"flat", AxisDirection::LowerBetter}, {"c", AxisDirection::HigherBetter}};
  spec.methods = {"m", "n"};
  spec.values = {{1, 2, 3}, {2, 2, 1}};
  try {
    qea(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
  }
}

TEST(Qea, JsonSpecRoundTrip) {
  const auto spec = PolygonSpec::from_json(R"({"axes":[{"name":"d","direction":"higher"},{"name":"h","direction":"lower"},
    {"name":"f","direction":"lower"}],"methods":[{"name":"p","values":[1,2,3]},{"name":"q","values":[2,1,1]}]})");
  ASSERT_EQ(spec.axes.size(), 3u);
  EXPECT_EQ(spec.axes[1].direction, AxisDirection::LowerBetter);
  const auto r = qea(spec);
  EXPECT_NEAR(r.areas[1], 1.5 * std::sin(2 * std::numbers::pi / 3), 1e-14);
  EXPECT_THROW(PolygonSpec::from_json(R"({"axes":[{"name":"d","direction":"up"}],"methods":[]})"), Error);
}

TEST(Wilcoxon, SixPositive) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6}, b(6, 0.0);
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_FALSE(r.inconclusive);
  EXPECT_DOUBLE_EQ(r.p_value, 0.03125);
  EXPECT_DOUBLE_EQ(oracle::enumerated_signed_rank_p(a, b), 0.03125);
}

TEST(Wilcoxon, IdenticalIsInconclusive) {
  const std::vector<double> a{0.3, 0.5, 0.9, 0.1, 0.7, 0.2};
  const auto r = wilcoxon_signed_rank(a, a);
  EXPECT_EQ(r.n, 0u);
  EXPECT_TRUE(r.inconclusive);
  const std::vector<Comparison> comps{{"same", a, a}};
  const auto out = wilcoxon_holm(comps);
  EXPECT_TRUE(std::isnan(out[0].adjusted_p));
  EXPECT_FALSE(out[0].significant);
}

TEST(Wilcoxon, MidranksWithTies) {
  const std::vector<double> d{-2, 1, 2, 3, -1};
  EXPECT_EQ(midranks(d), (std::vector<double>{3.5, 1.5, 3.5, 5, 1.5}));
}

TEST(Wilcoxon, ExactMatchesEnumeration) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid to force ties and zeros
      a[i] = static_cast<double>(rng.below(7));
      b[i] = static_cast<double>(rng.below(7));
    }
    const auto r = wilcoxon_signed_rank(a, b);
    if (r.n == 0) continue;
    ASSERT_TRUE(r.exact);
    EXPECT_NEAR(r.p_value, oracle::enumerated_signed_rank_p(a, b), 1e-12);
    EXPECT_DOUBLE_EQ(r.w_plus + r.w_minus, r.n * (r.n + 1) / 2.0);
  }
}

TEST(Wilcoxon, NormalApproximationWithTies) {
  // Reference value from an independent statistics package (approximate
  // method, no continuity correction, zeros dropped).
  const std::vector<double> a{3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7}, b{1, 2, 1, 1, 2, 3, 4, 1, 2, 1, 0, 3, 2, 4};
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_EQ(r.n, 13u);
  EXPECT_FALSE(r.exact);
  EXPECT_NEAR(r.p_value, 0.00354183927147738, 1e-12);
}

TEST(Holm, StepDown) {
  const std::vector<double> p{0.04, 0.01};
  const auto adj = holm_adjust(p);
  EXPECT_DOUBLE_EQ(adj[0], 0.04);
  EXPECT_DOUBLE_EQ(adj[1], 0.02);
}

TEST(Holm, MonotoneInRawOrder) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(1 + rng.below(10));
    for (auto& v : p) v = rng.uniform();
    const auto adj = holm_adjust(p);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return p[i] < p[j]; });
    for (std::size_t k = 0; k < p.size(); ++k) {
      EXPECT_GE(adj[order[k]], p[order[k]]);
      EXPECT_LE(adj[order[k]], 1.0);
      if (k > 0) {
        EXPECT_GE(adj[order[k]], adj[order[k - 1]]);
      }
    }
  }
}
