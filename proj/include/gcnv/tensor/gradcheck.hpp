#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gcnv/tensor/tensor.hpp"

namespace gcnv {

struct CoordinateCheck {
  std::size_t input = 0;  // which argument
  std::size_t index = 0;  // flat coordinate within it
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<CoordinateCheck> coordinates;
  double worst_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;

  std::string summary() const;
};

// Scalar-valued function of several tensors. It is called once with tracked
// leaves (analytic pass) and repeatedly with untracked perturbed copies.
using ScalarFunction = std::function<Tensor(std::span<const Tensor>)>;

// Compares reverse-mode gradients against central differences,
// error_i = |a_i - n_i| / max(|a_i|, |n_i|, 1e-8). Order 2 is the three-point
// central difference, order 4 the five-point one (twice the evaluations).
GradCheckReport finite_diff_check(const ScalarFunction& f, std::span<const Tensor> points, double tolerance,
                                  double step = 1e-5, int order = 2);

GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                                  double tolerance, double step = 1e-5, int order = 2);

}  // namespace gcnv
