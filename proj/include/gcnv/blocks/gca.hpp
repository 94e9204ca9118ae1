#pragma once

#include <string>

#include "gcnv/blocks/layers.hpp"

namespace gcnv {

struct GcaDown {
  Attention attn;
  Mlp kv_mlp;

  static GcaDown init(const BlockConfig& cfg, Rng& rng);
  void for_each(const std::string& prefix, const ParamFn& fn);
};

// One coarse voxel per nonempty pooling window (lexicographic by coarse
// coordinate). Query: max-pooled window features + PE(coarse coord); keys and
// values: MLP(f_i + PE(c_i)) of the members. The coarse voxel takes the
// smallest member id. Coarse extents are ceil(extents / pool).
SparseVoxelSet gca_down(const SparseVoxelSet& fine, int pool, const GcaDown& params, CostCounter* cost = nullptr,
                        const std::string& name = {});

struct GcaUp {
  Mlp q_mlp;
  Attention attn;
  Mlp out_mlp;

  static GcaUp init(const BlockConfig& cfg, Rng& rng);
  void for_each(const std::string& prefix, const ParamFn& fn);
};

// Every fine voxel attends to the coarse voxel of its pooling window:
// Q = MLP(f_i + PE(c_i)), K = V = f_coarse + PE(c_coarse), followed by an
// output MLP. With a single key the softmax weight is exactly 1, so the result
// does not depend on Q. Coordinates and ids of `fine` are kept.
SparseVoxelSet gca_up(const SparseVoxelSet& fine, const SparseVoxelSet& coarse, int pool, const GcaUp& params,
                      CostCounter* cost = nullptr, const std::string& name = {});

}  // namespace gcnv
