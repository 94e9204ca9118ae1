#pragma once

#include <span>
#include <string>
#include <vector>

namespace gcnv {

// Largest number of nonzero differences handled by the exact null distribution.
inline constexpr std::size_t kExactWilcoxonMax = 12;
// Fewer nonzero differences than this mark a comparison inconclusive.
inline constexpr std::size_t kWilcoxonMinPairs = 5;

struct WilcoxonResult {
  std::size_t n = 0;  // nonzero differences
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_value = 1.0;  // two-sided
  bool exact = false;
  bool inconclusive = false;
};

// Midranks of |values|, 1-based.
std::vector<double> midranks(std::span<const double> values);

// Two-sided exact p of observing w_plus given the (mid)ranks, from the
// distribution of signed-rank sums under random signs.
double exact_signed_rank_p(std::span<const double> ranks, double w_plus);

// Paired two-sided signed-rank test on a - b. Zero differences are dropped.
// Exact for n <= 12, otherwise normal approximation with tie correction and
// no continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// Holm step-down adjusted p-values, in input order.
std::vector<double> holm_adjust(std::span<const double> p);

struct Comparison {
  std::string name;
  std::vector<double> a;
  std::vector<double> b;
};

struct ComparisonResult {
  std::string name;
  WilcoxonResult test;
  double adjusted_p = 1.0;  // NaN for inconclusive comparisons
  bool significant = false;
};

// Inconclusive comparisons are reported but left out of the Holm family.
std::vector<ComparisonResult> wilcoxon_holm(std::span<const Comparison> comparisons, double alpha = 0.05);

std::string to_csv(const std::vector<ComparisonResult>& results);
std::string to_json(const std::vector<ComparisonResult>& results);

}  // namespace gcnv
