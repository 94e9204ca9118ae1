#include "gcnv/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gcnv/error.hpp"
#include "gcnv/tensor/tape.hpp"

namespace gcnv {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL") << " worst_relative_error=" << worst_relative_error << " tolerance=" << tolerance
     << " coordinates=" << coordinates.size();
  return os.str();
}

GradCheckReport finite_diff_check(const ScalarFunction& f, std::span<const Tensor> points, double tolerance,
                                  double step, int order) {
  require(order == 2 || order == 4, ErrorKind::InvalidArgument, "finite_diff_check: order must be 2 or 4");
  require(step > 0.0, ErrorKind::InvalidArgument, "finite_diff_check: step must be positive");
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(points.size());
  for (const auto& p : points) leaves.push_back(tape.leaf(p));
  const Tensor out = f(leaves);
  if (out.numel() != 1) fail(ErrorKind::Shape, "finite_diff_check: function is not scalar-valued");
  const Gradients grads = backward(out);

  std::vector<Tensor> probe(points.begin(), points.end());
  auto evaluate = [&](std::size_t input, std::size_t index, double value) {
    std::vector<double> vals(points[input].values().begin(), points[input].values().end());
    vals[index] = value;
    probe[input] = Tensor(points[input].shape(), std::move(vals));
    double y = 0.0;
    try {
      y = f(probe).item();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      y = std::nan("");
    }
    probe[input] = points[input];
    if (!std::isfinite(y)) {
      fail(ErrorKind::NonFinite, "finite_diff_check: non-finite value at input " + std::to_string(input) +
                                     " coordinate " + std::to_string(index));
    }
    return y;
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Tensor analytic = grads.empty() ? Tensor::zeros(points[k].shape()) : grads.of(leaves[k]);
    for (std::size_t i = 0; i < points[k].numel(); ++i) {
      const double x0 = points[k][i];
      const double d1 = evaluate(k, i, x0 + step) - evaluate(k, i, x0 - step);
      const double numeric = order == 2 ? d1 / (2.0 * step)
                                        : (8.0 * d1 - (evaluate(k, i, x0 + 2 * step) - evaluate(k, i, x0 - 2 * step))) /
                                              (12.0 * step);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      report.coordinates.push_back({k, i, a, numeric, err});
      report.worst_relative_error = std::max(report.worst_relative_error, err);
    }
  }
  report.passed = report.worst_relative_error <= tolerance;
  return report;
}

GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                                  double tolerance, double step, int order) {
  const Tensor points[] = {point};
  return finite_diff_check([&](std::span<const Tensor> xs) { return f(xs[0]); }, points, tolerance, step, order);
}

}  // namespace gcnv
