#pragma once

#include <array>
#include <string>

#include "gcnv/blocks/layers.hpp"
#include "gcnv/partition/partition.hpp"

namespace gcnv {

// Sequential feeds each direction the previous one's output; Parallel runs all
// three on the block input and sums their residual updates.
enum class DirectionSchedule { Sequential, Parallel };

struct TdnvtConfig {
  BlockConfig block;
  int window = 4;
  std::size_t capacity = 16;
  DirectionSchedule schedule = DirectionSchedule::Sequential;

  void validate() const;
};

// Pre-norm attention + MLP sub-block for one plane direction.
struct TdnvtDirection {
  Norm norm1;
  Attention attn;
  Norm norm2;
  Mlp mlp;

  void for_each(const std::string& prefix, const ParamFn& fn);
};

struct TdnvtBlock {
  std::array<TdnvtDirection, 3> directions;  // XY, XZ, YZ

  static TdnvtBlock init(const BlockConfig& cfg, Rng& rng);
  void for_each(const std::string& prefix, const ParamFn& fn);
};

// x' = x + MHA over each subset of (LN(x) + PE(c)); x'' = x' + MLP(LN(x')).
Tensor tdnvt_direction(const SparseVoxelSet& voxels, const Tensor& x, const WindowPartition& partition,
                       Direction direction, const TdnvtDirection& params, std::size_t capacity,
                       CostCounter* cost = nullptr, const std::string& name = {});

// XY, XZ, YZ in turn. Coordinates and ids pass through unchanged.
SparseVoxelSet tdnvt_block(const SparseVoxelSet& voxels, const TdnvtBlock& params, const TdnvtConfig& cfg,
                           CostCounter* cost = nullptr, const std::string& name = {});

}  // namespace gcnv
