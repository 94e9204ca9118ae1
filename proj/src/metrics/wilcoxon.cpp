#include "gcnv/metrics/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gcnv/error.hpp"

namespace gcnv {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::abs(values[i]) < std::abs(values[j]); });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(values[order[j + 1]]) == std::abs(values[order[i]])) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double exact_signed_rank_p(std::span<const double> ranks, double w_plus) {
  // Midranks are multiples of 1/2, so doubled ranks are integers.
  std::vector<std::size_t> r2;
  std::size_t total = 0;
  for (double r : ranks) {
    const double d = 2.0 * r;
    require(d >= 0.0 && d == std::round(d), ErrorKind::InvalidArgument, "ranks must be multiples of 1/2");
    r2.push_back(static_cast<std::size_t>(d));
    total += r2.back();
  }
  // count[s] = number of sign patterns whose doubled positive sum is s
  std::vector<double> count(total + 1, 0.0);
  count[0] = 1.0;
  for (std::size_t r : r2)
    for (std::size_t s = total; s + 1 > r; --s) count[s] += count[s - r];
  const double patterns = std::ldexp(1.0, static_cast<int>(ranks.size()));
  const auto w = static_cast<std::size_t>(std::llround(2.0 * w_plus));
  double lower = 0.0, upper = 0.0;
  for (std::size_t s = 0; s <= total; ++s) {
    if (s <= w) lower += count[s];
    if (s >= w) upper += count[s];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / patterns);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::Shape, "paired samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(std::isfinite(a[i]) && std::isfinite(b[i]), ErrorKind::NonFinite, "non-finite paired value");
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  WilcoxonResult r;
  r.n = d.size();
  const auto ranks = midranks(d);
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
  r.inconclusive = r.n < kWilcoxonMinPairs;
  if (r.n == 0) return r;
  if (r.n <= kExactWilcoxonMax) {
    r.exact = true;
    r.p_value = exact_signed_rank_p(ranks, r.w_plus);
    return r;
  }
  const double n = static_cast<double>(r.n);
  double ties = 0.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
  if (var <= 0.0) {
    r.p_value = 1.0;
    return r;
  }
  const double z = (r.w_plus - mean) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  return r;
}

std::vector<double> holm_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p[order[k]]));
    adj[order[k]] = running;
  }
  return adj;
}

std::vector<ComparisonResult> wilcoxon_holm(std::span<const Comparison> comparisons, double alpha) {
  std::vector<ComparisonResult> out;
  std::vector<double> family;
  std::vector<std::size_t> members;
  for (const auto& c : comparisons) {
    ComparisonResult r{c.name, wilcoxon_signed_rank(c.a, c.b), std::numeric_limits<double>::quiet_NaN(), false};
    if (!r.test.inconclusive) {
      members.push_back(out.size());
      family.push_back(r.test.p_value);
    }
    out.push_back(r);
  }
  const auto adj = holm_adjust(family);
  for (std::size_t i = 0; i < members.size(); ++i) {
    out[members[i]].adjusted_p = adj[i];
    out[members[i]].significant = adj[i] < alpha;
  }
  return out;
}

std::string to_csv(const std::vector<ComparisonResult>& results) {
  std::ostringstream os;
  os << std::setprecision(12) << "comparison,n,w_plus,w_minus,p_value,method,adjusted_p,significant,inconclusive\n";
  for (const auto& r : results) {
    os << r.name << ',' << r.test.n << ',' << r.test.w_plus << ',' << r.test.w_minus << ',' << r.test.p_value << ','
       << (r.test.exact ? "exact" : "normal") << ',';
    if (std::isnan(r.adjusted_p)) {
      os << "NA";
    } else {
      os << r.adjusted_p;
    }
    os << ',' << (r.significant ? 1 : 0) << ',' << (r.test.inconclusive ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string to_json(const std::vector<ComparisonResult>& results) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    j.push_back({{"comparison", r.name},
                 {"n", r.test.n},
                 {"w_plus", r.test.w_plus},
                 {"w_minus", r.test.w_minus},
                 {"p_value", r.test.p_value},
                 {"method", r.test.exact ? "exact" : "normal"},
                 {"adjusted_p", std::isnan(r.adjusted_p) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.adjusted_p)},
                 {"significant", r.significant},
                 {"inconclusive", r.test.inconclusive}});
  }
  return j.dump(2) + "\n";
}

}  // namespace gcnv
