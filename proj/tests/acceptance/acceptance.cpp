// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "gcnv/blocks/gca.hpp"
#include "gcnv/blocks/tdnvt.hpp"
#include "gcnv/error.hpp"
#include "gcnv/metrics/metrics.hpp"
#include "gcnv/metrics/qea.hpp"
#include "gcnv/metrics/wilcoxon.hpp"
#include "gcnv/net/flops.hpp"
#include "gcnv/net/gradcheck.hpp"
#include "gcnv/net/train.hpp"
#include "gcnv/partition/partition.hpp"
#include "gcnv/tensor/ops.hpp"
#include "gcnv/tensor/random.hpp"
#include "gcnv/volume/phantom.hpp"

using namespace gcnv;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = true;
  std::string summary;
  std::vector<std::string> details;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      passed = false;
      details.push_back("failed: " + what);
    }
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.passed = false;
    o.summary = std::string("exception: ") + e.what();
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (s >= limit_s) {
    o.passed = false;
    o.details.push_back(fmt("runtime %.1f s exceeds %.0f s", s, limit_s));
  }
  failures += o.passed ? 0 : 1;
  std::printf("%s %2d %s: %s [%.1f s]\n", o.passed ? "PASS" : "FAIL", id, name, o.summary.c_str(), s);
  for (const auto& d : o.details) std::printf("        %s\n", d.c_str());
  std::fflush(stdout);
}

// ---- helpers for the gradient suite ----

Tensor contract(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, rng.uniform_tensor(y.shape(), -1.0, 1.0)));
}

SparseVoxelSet random_set(std::uint64_t seed, std::size_t n, GridExtents e, std::size_t c) {
  Rng rng(seed);
  std::vector<Coord> all;
  for (int x = 0; x < e[0]; ++x)
    for (int y = 0; y < e[1]; ++y)
      for (int z = 0; z < e[2]; ++z) all.push_back({x, y, z});
  for (std::size_t i = all.size() - 1; i > 0; --i) std::swap(all[i], all[rng.below(i + 1)]);
  SparseVoxelSet s;
  s.extents = e;
  s.coords.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(s.coords.begin(), s.coords.end());
  for (std::size_t i = 0; i < n; ++i) s.ids.push_back(static_cast<VoxelId>(i));
  s.features = rng.uniform_tensor({n, c}, -2, 2);
  return s;
}

template <class P>
P jitter(P p, std::uint64_t seed) {
  Rng rng(seed);
  p.for_each("", [&](const std::string&, Tensor& t) { t = add(t, rng.uniform_tensor(t.shape(), -0.3, 0.3)); });
  return p;
}

// Checks parameters of `params` together with the extra tensors.
template <class P>
GradCheckReport check_with(const P& params, std::vector<Tensor> extra,
                           const std::function<Tensor(const P&, std::span<const Tensor>)>& body, double tol) {
  std::vector<Tensor> points = collect_params(params);
  const std::size_t n = points.size();
  points.insert(points.end(), extra.begin(), extra.end());
  ScalarFunction f = [&](std::span<const Tensor> in) { return body(assign_params(params, in), in.subspan(n)); };
  return finite_diff_check(f, points, tol);
}

// ---- criteria ----

Outcome zero_output() {
  Outcome o;
  Rng rng(1);
  std::size_t embeddings = 0, nonzero = 0, occupied = 0;
  for (int init = 0; init < 100; ++init) {
    EmbedConfig cfg;
    const std::size_t m = 1 + rng.below(4);
    const Tensor w = init_embedding_weights(cfg, m, 1000 + init);
    for (int patch = 0; patch < 100; ++patch) {
      const Extents e{2 + rng.below(7), 2 + rng.below(7), 2 + rng.below(7)};
      std::vector<double> b(m);
      for (auto& v : b) v = rng.uniform(-3.0, 3.0);
      std::vector<double> values(e[0] * e[1] * e[2] * m);
      for (std::size_t i = 0; i < values.size(); ++i) values[i] = b[i % m];
      const DenseVolume vol(Tensor({e[0], e[1], e[2], m}, values), NormalizationRecord{});
      const Tensor f = embed_volume(vol, b, w, cfg);
      for (double v : f.values()) nonzero += v != 0.0 ? 1 : 0;
      occupied += compute_occupancy(f, cfg).popcount();
      ++embeddings;
    }
  }
  o.expect(nonzero == 0, "nonzero feature values");
  o.expect(occupied == 0, "occupied sites");
  o.summary = fmt("%zu embeddings, nonzero features %zu, occupied sites %zu (exact zero required)", embeddings, nonzero,
                  occupied);
  return o;
}

Outcome gradient_suite() {
  Outcome o;
  const double tol = 1e-4;
  const BlockConfig bc{12, 4, 2.0};
  double worst = 0.0;
  auto record = [&](const std::string& name, const GradCheckReport& r) {
    worst = std::max(worst, r.worst_relative_error);
    o.details.push_back(fmt("%-20s %s", name.c_str(), r.summary().c_str()));
    o.expect(r.passed, name);
  };
  Rng rng(100);

  {
    const auto attn = jitter(Attention::init(12, 4, rng), 101);
    std::vector<Tensor> x{rng.uniform_tensor({3, 12}, -2, 2), rng.uniform_tensor({5, 12}, -2, 2),
                          rng.uniform_tensor({5, 12}, -2, 2)};
    record("mha", check_with<Attention>(attn, x, [](const Attention& a, std::span<const Tensor> in) {
             return contract(multi_head_attention(in[0], in[1], in[2], a), 102);
           }, tol));
  }
  {
    const auto attn = jitter(Attention::init(12, 4, rng), 103);
    const auto s = random_set(104, 6, {4, 4, 4}, 12);
    const Tensor pe = positional_rows(s.coords, 12);
    record("pe+attention", check_with<Attention>(attn, {s.features}, [&](const Attention& a, std::span<const Tensor> in) {
             const Tensor u = add(in[0], pe);
             return contract(multi_head_attention(u, u, u, a), 105);
           }, tol));
  }
  {
    const auto block = jitter(TdnvtBlock::init(bc, rng), 106);
    const auto s = random_set(107, 8, {4, 4, 4}, 12);
    const TdnvtConfig tc{bc, 4, 3};
    record("tdnvt_block", check_with<TdnvtBlock>(block, {s.features}, [&](const TdnvtBlock& b, std::span<const Tensor> in) {
             return contract(tdnvt_block(s.with_features(in[0]), b, tc).features, 108);
           }, tol));
  }
  {
    const auto down = jitter(GcaDown::init(bc, rng), 109);
    const auto s = random_set(110, 6, {4, 4, 4}, 12);
    record("gca_down", check_with<GcaDown>(down, {s.features}, [&](const GcaDown& g, std::span<const Tensor> in) {
             return contract(gca_down(s.with_features(in[0]), 2, g).features, 111);
           }, tol));
  }
  {
    const auto down = jitter(GcaDown::init(bc, rng), 112);
    const auto up = jitter(GcaUp::init(bc, rng), 113);
    const auto s = random_set(114, 6, {4, 4, 4}, 12);
    const auto coarse = gca_down(s, 2, down);
    record("gca_up", check_with<GcaUp>(up, {s.features, coarse.features.detach()},
                                       [&](const GcaUp& g, std::span<const Tensor> in) {
                                         return contract(gca_up(s.with_features(in[0]), coarse.with_features(in[1]), 2, g).features, 115);
                                       }, tol));
  }
  {
    EmbedConfig cfg;
    cfg.temperature = 0.5;
    const Tensor f = rng.uniform_tensor({2, 2, 2, 12}, -0.4, 0.4);
    record("soft_nonvoid_ratio", finite_diff_check([&](const Tensor& x) { return soft_nonvoid_ratio(x, cfg); }, f, tol));
  }
  {
    std::vector<int> labels(8);
    for (auto& l : labels) l = static_cast<int>(rng.below(3));
    const Tensor logits = rng.uniform_tensor({8, 3}, -2, 2);
    record("seg_loss", finite_diff_check([&](const Tensor& x) { return seg_loss(x, labels).total; }, logits, tol));
  }

  auto cfg = ModelConfig::toy();
  cfg.channels = {12, 12};
  cfg.embed.channels = 12;
  const NetGradCheck net = net_gradcheck(cfg, {});
  o.details.push_back(fmt("%-20s %s (8^3 phantom, 2 stages, C=12, %zu parameters)", "end-to-end", net.report.summary().c_str(),
                          net.parameters));
  o.expect(net.report.passed, "end-to-end net");
  o.summary = fmt("blocks worst %.3g (tol 1e-4), end-to-end worst %.3g (tol 1e-3)", worst, net.report.worst_relative_error);
  return o;
}

Outcome subset_counts() {
  Outcome o;
  std::size_t checked = 0, wrong = 0;
  for (std::size_t phi = 1; phi <= 1000; ++phi)
    for (std::size_t cap = 1; cap <= 64; ++cap) {
      const std::size_t expect = phi / cap + (phi % cap != 0 ? 1 : 0);
      wrong += subset_count(phi, cap) != expect ? 1 : 0;
      ++checked;
    }
  o.expect(wrong == 0, "subset_count mismatches");
  o.summary = fmt("%zu (phi, cap) pairs, %zu mismatches", checked, wrong);
  return o;
}

Outcome complexity() {
  Outcome o;
  for (int t : {4, 8, 16}) {
    SparseVoxelSet s;
    s.extents = {t, t, t};
    for (int x = 0; x < t; ++x)
      for (int y = 0; y < t; ++y)
        for (int z = 0; z < t; ++z) s.coords.push_back({x, y, z});
    for (std::size_t i = 0; i < s.coords.size(); ++i) s.ids.push_back(static_cast<VoxelId>(i));
    const std::size_t cap = static_cast<std::size_t>(t * t);
    Rng rng(200 + t);
    s.features = rng.uniform_tensor({s.coords.size(), 12}, -1, 1);

    const auto report = pair_count_report(s, t, cap);
    const BlockConfig bc{12, 4, 2.0};
    const auto block = TdnvtBlock::init(bc, rng);
    CostCounter cost;
    tdnvt_block(s, block, {bc, t, cap}, &cost, "t");

    const std::size_t t4 = static_cast<std::size_t>(t) * t * t * t;
    const std::size_t tri = 3 * static_cast<std::size_t>(t) * t4, dense = t4 * t * t;
    const bool ok = report.tri_directional == tri && cost.attention_pairs == tri && report.dense3d == dense &&
                    report.dense3d * 3 == report.tri_directional * static_cast<std::size_t>(t);
    o.expect(ok, fmt("t=%d", t));
    o.details.push_back(fmt("t=%-2d tri %zu (block counter %zu, 3t^5=%zu), dense %zu (t^6=%zu), reduction %zu/%zu = t/3", t,
                            report.tri_directional, cost.attention_pairs, tri, report.dense3d, dense, report.dense3d,
                            report.tri_directional));
  }
  o.summary = "saturated windows t in {4, 8, 16}, cap = t^2: tri = 3t^5, dense = t^6, ratio t/3 exactly";
  return o;
}

Outcome table_arithmetic() {
  Outcome o;
  struct Row {
    const char* name;
    double nonvoid, traditional, saving;
  };
  const Row rows[] = {
      {"MSD Prostate", 57.19, 131.1, 56.38},  {"BraTS2021", 38.84, 262.1, 85.18},   {"ACDC", 6.71, 16.4, 59.11},
      {"SIMON BIDS", 138.10, 262.1, 47.31},   {"SPIDER", 110.53, 262.1, 57.83},     {"ISLES2022", 2.58, 16.4, 84.26},
      {"MSD BrainTumor", 37.32, 262.1, 85.76}, {"IXI", 97.00, 262.1, 62.99},         {"BreastDM", 14.28, 32.8, 56.47},
      {"MSD Pancreas", 118.18, 524.3, 77.46}, {"AMOS2022", 468.72, 2097.2, 77.65},
  };
  std::size_t bad_rows = 0;
  for (const auto& r : rows) {
    const double pct = 100.0 * saving_from_counts(r.nonvoid, r.traditional);
    const double d = std::abs(pct - r.saving);
    const bool ok = d <= 0.01;
    bad_rows += ok ? 0 : 1;
    o.expect(ok, fmt("table row %s", r.name));
    o.details.push_back(fmt("%-4s %-15s %8.2fk / %7.1fk -> %8.4f%% (reference %.2f%%, |d| %.4f pp, tol 0.01)",
                            ok ? "ok" : "off", r.name, r.nonvoid, r.traditional, pct, r.saving, d));
  }
  double worst_phantom = 0.0;
  for (double bg : {0.2, 0.5, 0.8}) {
    const Phantom p = generate_phantom(300 + static_cast<std::uint64_t>(bg * 10), default_phantom_spec({32, 32, 32}, bg, 2));
    const std::vector<NamedVolume> vols{{"phantom", p.volume}};
    const auto table = voxel_saving_stats(vols, EmbedConfig{}, 7);
    const auto b = derive_background_constant(p.volume);
    const double oracle = 100.0 * (1.0 - static_cast<double>(oracle::overlapping_patches(p.volume, b, 2, 2)) /
                                             static_cast<double>(oracle::embedded_sites(p.volume, 2, 2)));
    const double measured = 100.0 * table.rows[0].saving;
    const double d = std::abs(measured - oracle);
    worst_phantom = std::max(worst_phantom, d);
    o.expect(d <= 0.5, fmt("phantom background %.0f%%", 100 * bg));
    o.details.push_back(fmt("phantom bg %2.0f%%: measured %.4f%%, patch-overlap oracle %.4f%% (|d| %.4f pp, tol 0.5)",
                            100 * bg, measured, oracle, d));
  }
  o.summary = fmt("%zu of 11 reference rows within 0.01 pp; phantoms worst |d| %.4f pp (tol 0.5)", 11 - bad_rows,
                  worst_phantom);
  return o;
}

Outcome eps_plateau() {
  Outcome o;
  const auto grid = default_epsilon_grid();
  double worst_spread = 0.0;
  bool monotone = true;
  for (double bg : {0.2, 0.5, 0.8}) {
    const Phantom p = generate_phantom(400 + static_cast<std::uint64_t>(bg * 10), default_phantom_spec({32, 32, 32}, bg));
    EmbedConfig cfg;
    const Tensor w = init_embedding_weights(cfg, 1, 11);
    const auto curve = epsilon_sweep(p.volume, w, cfg, grid);
    double lo = 1e9, hi = -1e9;
    for (const auto& pt : curve)
      if (pt.epsilon <= 1e-3 * (1 + 1e-12)) {
        lo = std::min(lo, 100 * pt.saving);
        hi = std::max(hi, 100 * pt.saving);
      }
    bool mono = true;
    for (std::size_t i = 1; i < curve.size(); ++i) mono = mono && curve[i].saving >= curve[i - 1].saving;
    monotone = monotone && mono;
    worst_spread = std::max(worst_spread, hi - lo);
    o.expect(hi - lo < 0.1, fmt("plateau at background %.0f%%", 100 * bg));
    o.expect(mono, fmt("monotone at background %.0f%%", 100 * bg));
    o.details.push_back(fmt("bg %2.0f%%: saving %.4f%% .. %.4f%% on [1e-11, 1e-3], %.4f%% at eps=%g, monotone %s", 100 * bg,
                            lo, hi, 100 * curve.back().saving, curve.back().epsilon, mono ? "yes" : "no"));
  }
  o.summary = fmt("worst plateau spread %.4f pp (tol < 0.1), sweep to 1e1 monotone: %s", worst_spread,
                  monotone ? "yes" : "no");
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  Rng rng(500);
  std::size_t pairs = 0, overlap_bad = 0, surface_pairs = 0;
  double worst_hd = 0.0, worst_nsd = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Extents e{1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(8)};
    const std::size_t n = e[0] * e[1] * e[2];
    BinaryMask a{e, std::vector<std::uint8_t>(n)}, b{e, std::vector<std::uint8_t>(n)};
    const double da = rng.uniform(0.0, 0.8), db = rng.uniform(0.0, 0.8);
    for (std::size_t i = 0; i < n; ++i) {
      a.bits[i] = rng.uniform() < da;
      b.bits[i] = rng.uniform() < db;
    }
    if (trial % 4 != 0) {  // mostly nonempty pairs so surface metrics are defined
      if (a.count() == 0) a.bits[rng.below(n)] = 1;
      if (b.count() == 0) b.bits[rng.below(n)] = 1;
    }
    ++pairs;
    // overlap by set arithmetic on coordinates
    const auto ca = oracle::cells_of(e, a.bits), cb = oracle::cells_of(e, b.bits);
    std::vector<oracle::Cell> inter, uni;
    std::set_intersection(ca.begin(), ca.end(), cb.begin(), cb.end(), std::back_inserter(inter));
    std::set_union(ca.begin(), ca.end(), cb.begin(), cb.end(), std::back_inserter(uni));
    const double dice = uni.empty() ? 1.0 : 2.0 * static_cast<double>(inter.size()) / static_cast<double>(ca.size() + cb.size());
    const double iou = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    const auto s = overlap_metrics(a, b);
    overlap_bad += (s.dice != dice || s.iou != iou) ? 1 : 0;
    if (ca.empty() || cb.empty()) continue;
    ++surface_pairs;
    const double tol = rng.uniform(0.0, 3.0);
    const auto m = surface_metrics(a, b, tol);
    const auto r = oracle::brute_surface(e, a.bits, b.bits, tol);
    worst_hd = std::max(worst_hd, std::abs(m.hd95 - r.hd95));
    worst_nsd = std::max(worst_nsd, std::abs(m.nsd - r.nsd));
  }
  o.expect(overlap_bad == 0, "overlap metrics differ");
  o.expect(worst_hd <= 1e-9, "hd95 difference");
  o.expect(worst_nsd <= 1e-9, "nsd difference");
  o.summary = fmt("%zu pairs: overlap mismatches %zu (exact); %zu surface pairs: |dHD95| %.2g, |dNSD| %.2g (tol 1e-9)", pairs,
                  overlap_bad, surface_pairs, worst_hd, worst_nsd);
  return o;
}

Outcome wilcoxon_exactness() {
  Outcome o;
  Rng rng(600);
  std::size_t samples = 0, wrong = 0;
  double worst = 0.0;
  for (std::size_t n = 1; n <= 10; ++n)
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> a(n), b(n);
      const bool coarse = rep % 2 == 0;  // coarse values force ties and zeros
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = coarse ? static_cast<double>(rng.below(6)) : rng.uniform();
        b[i] = coarse ? static_cast<double>(rng.below(6)) : rng.uniform();
      }
      const auto r = wilcoxon_signed_rank(a, b);
      ++samples;
      if (r.n == 0) continue;
      const double d = std::abs(r.p_value - oracle::enumerated_signed_rank_p(a, b));
      worst = std::max(worst, d);
      wrong += (!r.exact || d > 1e-12) ? 1 : 0;
    }
  o.expect(wrong == 0, "exact branch differs from enumeration");

  std::size_t families = 0, order_bad = 0;
  for (int fam = 0; fam < 50; ++fam) {
    std::vector<double> p(2 + rng.below(9));
    for (auto& v : p) v = rng.uniform() * (rng.uniform() < 0.5 ? 0.05 : 1.0);
    const auto adj = holm_adjust(p);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
    for (std::size_t k = 1; k < order.size(); ++k) order_bad += adj[order[k]] < adj[order[k - 1]] ? 1 : 0;
    ++families;
  }
  const std::vector<double> two{0.01, 0.04};
  const auto h = holm_adjust(two);
  o.expect(order_bad == 0, "Holm order");
  o.expect(std::abs(h[0] - 0.02) < 1e-15 && std::abs(h[1] - 0.04) < 1e-15, "Holm (0.01, 0.04)");
  o.summary = fmt("%zu samples n<=10: worst |p - enumeration| %.2g, %zu mismatches; Holm nondecreasing in %zu families", samples,
                  worst, wrong, families);
  return o;
}

Outcome qea_fixture() {
  Outcome o;
  PolygonSpec spec;
  spec.axes = {{"dice", AxisDirection::HigherBetter},
               {"hd95", AxisDirection::LowerBetter},
               {"flops", AxisDirection::LowerBetter},
               {"nsd", AxisDirection::HigherBetter}};
  spec.methods = {"A", "B", "C"};
  spec.values = {{0.90, 2.0, 10.0, 0.80}, {0.80, 4.0, 5.0, 0.90}, {0.85, 3.0, 20.0, 0.70}};
  // Radii A (1, 1, 2/3, 1/2), B (0, 0, 1, 1), C (1/2, 1/2, 0, 0); sin(2 pi/4) = 1.
  const double hand[3] = {0.5 * (1.0 + 2.0 / 3.0 + 1.0 / 3.0 + 0.5), 0.5 * 1.0, 0.5 * 0.25};
  const auto r = qea(spec);
  double worst = 0.0;
  for (int m = 0; m < 3; ++m) worst = std::max(worst, std::abs(r.areas[m] - hand[m]));
  o.expect(worst <= 1e-12, "fixture areas");
  o.details.push_back(fmt("areas %.15f %.15f %.15f vs hand %.15f %.15f %.15f", r.areas[0], r.areas[1], r.areas[2], hand[0],
                          hand[1], hand[2]));

  double worst_best = 0.0;
  for (std::size_t k = 3; k <= 8; ++k) {
    PolygonSpec s;
    for (std::size_t a = 0; a < k; ++a)
      s.axes.push_back({"axis" + std::to_string(a), a % 2 ? AxisDirection::LowerBetter : AxisDirection::HigherBetter});
    s.methods = {"best", "other", "third"};
    std::vector<double> best, other, third;
    for (std::size_t a = 0; a < k; ++a) {
      const bool hb = a % 2 == 0;
      best.push_back(hb ? 10.0 : 1.0);
      other.push_back(hb ? 3.0 + static_cast<double>(a) * 0.1 : 7.0);
      third.push_back(5.0);
    }
    s.values = {best, other, third};
    const auto q = qea(s);
    for (double v : q.radii[0]) o.expect(v == 1.0, fmt("all-best radius K=%zu", k));
    worst_best = std::max(worst_best, std::abs(q.areas[0] - 0.5 * static_cast<double>(k) * std::sin(2 * std::numbers::pi / k)));
  }
  o.expect(worst_best <= 1e-12, "all-best area");
  o.summary = fmt("fixture worst |d| %.2g (tol 1e-12); all-best radii 1 and area K/2 sin(2pi/K) for K=3..8 (|d| %.2g)", worst,
                  worst_best);
  return o;
}

Outcome training_pressure() {
  Outcome o;
  const Phantom p = generate_phantom(1, default_phantom_spec({16, 16, 16}, 0.5));
  const std::vector<LabeledVolume> data{{p.volume, p.labels}};
  double final_rnv[2] = {0, 0};
  const double lambdas[2] = {0.0, 0.1};
  for (int i = 0; i < 2; ++i) {
    auto cfg = ModelConfig::toy();
    cfg.embed.lambda = lambdas[i];
    const auto r = train_toy(data, cfg, init_weights(cfg, 1), {50, 0.05});
    const double l0 = r.trajectory.front().total, l1 = r.trajectory.back().total;
    const double drop = 100.0 * (1.0 - l1 / l0);
    final_rnv[i] = r.trajectory.back().nonvoid_ratio;
    o.expect(drop >= 30.0, fmt("loss reduction with lambda %.1f", lambdas[i]));
    o.details.push_back(fmt("lambda %.1f: L_total %.6f -> %.6f (-%.2f%%, need >= 30%%), final r_nv %.6f", lambdas[i], l0, l1, drop,
                            final_rnv[i]));
  }
  o.expect(final_rnv[1] < final_rnv[0], "r_nv with lambda 0.1 below lambda 0");
  o.summary = fmt("50 steps on 16^3 phantom; final r_nv %.6f (lambda 0.1) vs %.6f (lambda 0)", final_rnv[1], final_rnv[0]);
  return o;
}

Outcome efficiency() {
  Outcome o;
  const auto cfg = ModelConfig::toy();
  const Tensor w = init_embedding_weights(cfg.embed, 1, cfg.seed);
  std::size_t phantoms = 0;
  for (std::size_t extent : {16u, 32u})
    for (int step = 0; step <= 9; ++step) {
      const double bg = 0.1 * step;
      const Phantom p = generate_phantom(700 + step, default_phantom_spec({extent, extent, extent}, bg));
      const double measured_bg = p.background_fraction();
      const double sparse = count_flops(cfg, structure_stats(p.volume, cfg, w, false)).total;
      const double dense = count_flops(cfg, structure_stats(p.volume, cfg, w, true)).total;
      const bool ok = measured_bg > 0.0 ? sparse < dense : sparse == dense;
      o.expect(ok, fmt("%zu^3 background %.2f", extent, measured_bg));
      if (step % 3 == 0 || !ok) {
        o.details.push_back(fmt("%zu^3 bg %.3f: nonvoid %.6g vs dense %.6g FLOPs (saving %.2f%%)", extent, measured_bg, sparse,
                                dense, 100.0 * (1.0 - sparse / dense)));
      }
      ++phantoms;
    }
  o.summary = fmt("%zu phantoms: nonvoid < dense whenever background > 0, equal at 0", phantoms);
  return o;
}

}  // namespace

int main() {
  criterion(1, "zero-output exactness", 10, zero_output);
  criterion(2, "gradient suite", 120, gradient_suite);
  criterion(3, "subset count exhaustive", 1, subset_counts);
  criterion(4, "complexity reduction", 30, complexity);
  criterion(5, "voxel saving arithmetic", 60, table_arithmetic);
  criterion(6, "epsilon plateau", 60, eps_plateau);
  criterion(7, "metric oracles", 60, metric_oracles);
  criterion(8, "wilcoxon exactness", 30, wilcoxon_exactness);
  criterion(9, "qea fixture", 1, qea_fixture);
  criterion(10, "training pressure", 300, training_pressure);
  criterion(11, "efficiency dominance", 60, efficiency);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
