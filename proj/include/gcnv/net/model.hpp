#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gcnv/blocks/conv_blocks.hpp"
#include "gcnv/blocks/gca.hpp"
#include "gcnv/net/config.hpp"
#include "gcnv/volume/tensor_bundle.hpp"

namespace gcnv {

// Feature extraction applied to each downsampled level.
struct LevelExtractor {
  bool use_conv = true;
  ResidualConv conv;
  TdnvtBlock tdnvt;

  void for_each(const std::string& prefix, const ParamFn& fn);
};

struct ModelWeights {
  Tensor embed;                             // [k, k, k, M, C0]
  std::vector<TdnvtBlock> encoder;          // per stage
  std::vector<GcaDown> down;                // per stage
  std::vector<std::optional<Linear>> down_proj;  // C_i -> C_{i+1} when they differ
  std::vector<LevelExtractor> extract;      // levels 1..stages
  std::vector<std::optional<Linear>> up_proj;    // level l+1 -> level l channels
  std::vector<GcaUp> up;                    // per stage
  Linear head;                              // C0 -> classes
  Tensor fill;                              // [classes] logits for void sites

  void for_each(const std::string& prefix, const ParamFn& fn);
  std::size_t parameter_count();
};

ModelWeights init_weights(const ModelConfig& cfg, std::size_t modalities);

void save_weights(ModelWeights weights, const std::string& path);
// Structure comes from `cfg`; every tensor must be present with a matching shape.
ModelWeights load_weights(const ModelConfig& cfg, std::size_t modalities, const std::string& path);

struct Prediction {
  Tensor logits;         // [H, W, D, classes]
  Tensor probabilities;  // softmax over classes
};

struct ForwardResult {
  Prediction prediction;
  Tensor embedded;                     // [H', W', D', C0], for the soft ratio
  OccupancyMap occupancy;
  std::vector<SparseVoxelSet> levels;  // encoder inputs V_0..V_S (after extraction for l >= 1)
  SparseVoxelSet decoded;              // D_0
  CostCounter cost;
};

struct ForwardOptions {
  // All-ones occupancy: every embedded site is processed.
  bool dense_forced = false;
};

ForwardResult forward(const DenseVolume& volume, const ModelConfig& cfg, const ModelWeights& weights,
                      const ForwardOptions& options = {});

}  // namespace gcnv
