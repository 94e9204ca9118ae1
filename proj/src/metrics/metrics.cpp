#include "gcnv/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gcnv/error.hpp"

namespace gcnv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_same(const BinaryMask& a, const BinaryMask& b) {
  const std::size_t n = a.extents[0] * a.extents[1] * a.extents[2];
  if (a.extents != b.extents || a.bits.size() != n || b.bits.size() != n) {
    fail(ErrorKind::Shape, "mask extents differ: (" + std::to_string(a.extents[0]) + ", " + std::to_string(a.extents[1]) +
                               ", " + std::to_string(a.extents[2]) + ") vs (" + std::to_string(b.extents[0]) + ", " +
                               std::to_string(b.extents[1]) + ", " + std::to_string(b.extents[2]) + ")");
  }
}

// Squared distance lower envelope along one line (Felzenszwalb & Huttenlocher).
// f holds squared distances, +inf for no site; result written back into f.
void edt_1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    // z[0] = -inf, so k never drops below 0
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) return;  // no sites: stays +inf
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
  for (int q = 0; q < n; ++q) f[q] = d[q];
}

}  // namespace

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

BinaryMask class_mask(const Extents& extents, std::span<const int> labels, int label) {
  require(labels.size() == extents[0] * extents[1] * extents[2], ErrorKind::Shape, "label count does not match extents");
  BinaryMask m{extents, std::vector<std::uint8_t>(labels.size())};
  for (std::size_t i = 0; i < labels.size(); ++i) m.bits[i] = labels[i] == label ? 1 : 0;
  return m;
}

OverlapScores overlap_metrics(const BinaryMask& pred, const BinaryMask& truth) {
  check_same(pred, truth);
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    const bool p = pred.bits[i] != 0, t = truth.bits[i] != 0;
    a += p;
    b += t;
    both += p && t;
  }
  if (a + b == 0) return {1.0, 1.0};
  return {2.0 * static_cast<double>(both) / static_cast<double>(a + b),
          static_cast<double>(both) / static_cast<double>(a + b - both)};
}

BinaryMask surface_of(const BinaryMask& mask) {
  const auto& e = mask.extents;
  BinaryMask out{e, std::vector<std::uint8_t>(mask.bits.size(), 0)};
  auto fg = [&](long x, long y, long z) {
    if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(e[0]) || y >= static_cast<long>(e[1]) ||
        z >= static_cast<long>(e[2]))
      return false;
    return mask.bits[(static_cast<std::size_t>(x) * e[1] + static_cast<std::size_t>(y)) * e[2] + static_cast<std::size_t>(z)] != 0;
  };
  for (long x = 0; x < static_cast<long>(e[0]); ++x)
    for (long y = 0; y < static_cast<long>(e[1]); ++y)
      for (long z = 0; z < static_cast<long>(e[2]); ++z) {
        if (!fg(x, y, z)) continue;
        const bool inner = fg(x - 1, y, z) && fg(x + 1, y, z) && fg(x, y - 1, z) && fg(x, y + 1, z) &&
                           fg(x, y, z - 1) && fg(x, y, z + 1);
        if (!inner) out.bits[(static_cast<std::size_t>(x) * e[1] + static_cast<std::size_t>(y)) * e[2] + static_cast<std::size_t>(z)] = 1;
      }
  return out;
}

std::vector<double> distance_to(const BinaryMask& mask) {
  const auto& e = mask.extents;
  std::vector<double> g(mask.bits.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = mask.bits[i] ? 0.0 : kInf;
  const std::size_t longest = std::max({e[0], e[1], e[2]});
  std::vector<double> line(longest), d(longest), z(longest + 1);
  std::vector<int> v(longest);
  const std::size_t stride[3] = {e[1] * e[2], e[2], 1};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = e[axis];
    line.resize(n);
    // iterate over every line parallel to `axis`
    for (std::size_t base = 0; base < g.size(); ++base) {
      const std::size_t coord = (base / stride[axis]) % n;
      if (coord != 0) continue;
      for (std::size_t i = 0; i < n; ++i) line[i] = g[base + i * stride[axis]];
      edt_1d(line, d, v, z);
      for (std::size_t i = 0; i < n; ++i) g[base + i * stride[axis]] = line[i];
    }
  }
  for (auto& x : g) x = std::sqrt(x);
  return g;
}

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorKind::InvalidArgument, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

SurfaceScores surface_metrics(const BinaryMask& pred, const BinaryMask& truth, double tolerance) {
  check_same(pred, truth);
  if (pred.count() == 0 || truth.count() == 0) {
    fail(ErrorKind::Degenerate, "surface metrics are undefined for an empty mask");
  }
  require(tolerance >= 0.0, ErrorKind::InvalidArgument, "NSD tolerance must be >= 0");
  const BinaryMask sp = surface_of(pred), st = surface_of(truth);
  const auto to_truth = distance_to(st), to_pred = distance_to(sp);
  std::vector<double> pooled;
  std::size_t near_p = 0, near_t = 0, np = 0, nt = 0;
  for (std::size_t i = 0; i < sp.bits.size(); ++i) {
    if (sp.bits[i]) {
      pooled.push_back(to_truth[i]);
      ++np;
      near_p += to_truth[i] <= tolerance;
    }
    if (st.bits[i]) {
      pooled.push_back(to_pred[i]);
      ++nt;
      near_t += to_pred[i] <= tolerance;
    }
  }
  return {percentile(std::move(pooled), 95.0),
          0.5 * (static_cast<double>(near_p) / static_cast<double>(np) + static_cast<double>(near_t) / static_cast<double>(nt))};
}

MetricReport evaluate_segmentation(const Extents& extents, std::span<const int> pred, std::span<const int> truth,
                                   std::size_t classes, double nsd_tolerance) {
  require(pred.size() == truth.size(), ErrorKind::Shape, "prediction and truth differ in size");
  require(classes >= 2, ErrorKind::InvalidArgument, "need at least two classes");
  MetricReport r;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t c = 1; c < classes; ++c) {
    const int label = static_cast<int>(c);
    const BinaryMask p = class_mask(extents, pred, label), t = class_mask(extents, truth, label);
    const auto ov = overlap_metrics(p, t);
    ClassMetrics m{label, ov.dice, ov.iou, nan, nan};
    const std::size_t cp = p.count(), ct = t.count();
    if (cp == 0 && ct == 0) {
      m.hd95 = 0.0;
      m.nsd = 1.0;
    } else if (cp > 0 && ct > 0) {
      const auto s = surface_metrics(p, t, nsd_tolerance);
      m.hd95 = s.hd95;
      m.nsd = s.nsd;
    }
    r.classes.push_back(m);
  }
  auto mean_of = [&](double ClassMetrics::*field) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& m : r.classes)
      if (!std::isnan(m.*field)) {
        s += m.*field;
        ++n;
      }
    return n == 0 ? nan : s / static_cast<double>(n);
  };
  r.mean_dice = mean_of(&ClassMetrics::dice);
  r.mean_iou = mean_of(&ClassMetrics::iou);
  r.mean_hd95 = mean_of(&ClassMetrics::hd95);
  r.mean_nsd = mean_of(&ClassMetrics::nsd);
  return r;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10) << "class,dice,iou,hd95,nsd\n";
  for (const auto& m : classes) os << m.label << ',' << m.dice << ',' << m.iou << ',' << m.hd95 << ',' << m.nsd << '\n';
  os << "mean," << mean_dice << ',' << mean_iou << ',' << mean_hd95 << ',' << mean_nsd << '\n';
  return os.str();
}

std::string MetricReport::to_json() const {
  auto num = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  nlohmann::ordered_json j;
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& m : classes) {
    j["classes"].push_back({{"class", m.label}, {"dice", num(m.dice)}, {"iou", num(m.iou)}, {"hd95", num(m.hd95)},
                            {"nsd", num(m.nsd)}});
  }
  j["mean"] = {{"dice", num(mean_dice)}, {"iou", num(mean_iou)}, {"hd95", num(mean_hd95)}, {"nsd", num(mean_nsd)}};
  j["cost"] = {{"attention_pairs", attention_pairs}, {"flops", flops}};
  return j.dump(2) + "\n";
}

}  // namespace gcnv
