#pragma once

#include <span>

#include "gcnv/net/model.hpp"

namespace gcnv {

// Smoothing term of the soft Dice ratio.
inline constexpr double kDiceSmooth = 1e-5;

struct SegLoss {
  Tensor total;  // dice + ce
  Tensor dice;   // 1 - mean_c (2 sum p g + s) / (sum p + sum g + s)
  Tensor ce;     // mean over voxels of -log p[label]
};

// logits [..., classes]; one label per voxel in row-major order.
SegLoss seg_loss(const Tensor& logits, std::span<const int> labels);

}  // namespace gcnv
