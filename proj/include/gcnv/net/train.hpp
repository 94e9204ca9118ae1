#pragma once

#include <string>
#include <vector>

#include "gcnv/net/loss.hpp"

namespace gcnv {

struct LabeledVolume {
  DenseVolume volume;
  std::vector<int> labels;
};

struct TrainOptions {
  std::size_t steps = 50;
  double learning_rate = 0.05;
};

// Values before the update of that step; record `steps` is after the last update.
struct TrainRecord {
  std::size_t step = 0;
  double seg = 0.0;
  double nonvoid_ratio = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<TrainRecord> trajectory;  // steps + 1 entries
  ModelWeights weights;
};

// Loss of one case: seg_loss + lambda * r_nv, with lambda from cfg.embed.
Tensor case_loss(const LabeledVolume& item, const ModelConfig& cfg, const ModelWeights& weights, TrainRecord* record);

// Plain gradient descent on the mean case loss. Throws Divergence when the
// loss exceeds 1e6 or turns non-finite.
TrainResult train_toy(std::span<const LabeledVolume> data, const ModelConfig& cfg, ModelWeights weights,
                      const TrainOptions& options);

std::string trajectory_csv(const std::vector<TrainRecord>& trajectory);

}  // namespace gcnv
