#pragma once

#include <string>

#include "gcnv/blocks/layers.hpp"
#include "gcnv/tensor/ops.hpp"

namespace gcnv {

// Submanifold rulebook: outputs only at input sites; offset index
// ((dx+1)*k + (dy+1))*k + (dz+1) for k = 3, matching conv3d's kernel layout.
Rulebook submanifold_rulebook(const SparseVoxelSet& voxels, int kernel = 3);

// conv -> LN -> GELU -> conv -> LN -> GELU, plus identity skip. Zero conv
// weights (and zero LN shifts) make the block the identity.
struct ResidualConv {
  Tensor w1;  // [27, C, C]
  Norm n1;
  Tensor w2;
  Norm n2;

  static ResidualConv init(std::size_t channels, Rng& rng);
  std::size_t channels() const { return w1.dim(2); }
  void for_each(const std::string& prefix, const ParamFn& fn);
};

SparseVoxelSet residual_sparse_conv(const SparseVoxelSet& voxels, const ResidualConv& params,
                                    CostCounter* cost = nullptr, const std::string& name = {});

// Same block on a dense [X, Y, Z, C] grid with zero padding.
Tensor residual_dense_conv(const Tensor& grid, const ResidualConv& params, CostCounter* cost = nullptr,
                           const std::string& name = {});

}  // namespace gcnv
