#pragma once

#include <string>
#include <vector>

#include "gcnv/net/train.hpp"
#include "gcnv/tensor/gradcheck.hpp"

namespace gcnv {

struct NetGradCheckOptions {
  std::size_t extent = 8;         // cubic phantom side
  double background = 0.5;        // phantom background fraction
  std::uint64_t phantom_seed = 2;
  // Every parameter except the embedding kernel is shifted by U(-jitter, jitter)
  // so the check runs at a generic point rather than at zero biases.
  double jitter = 0.3;
  std::uint64_t jitter_seed = 99;
  double step = 1e-4;
  int order = 2;  // finite-difference stencil order, 2 or 4
  double tolerance = 1e-3;
};

struct NetGradCheck {
  GradCheckReport report;
  std::vector<std::string> names;  // parameter name per report input index
  std::size_t parameters = 0;
};

// Finite-difference check of the full training loss (segmentation + soft
// nonvoid term) against every model parameter.
NetGradCheck net_gradcheck(const ModelConfig& cfg, const NetGradCheckOptions& options);

}  // namespace gcnv
