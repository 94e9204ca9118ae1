#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gcnv/tensor/tensor.hpp"

namespace gcnv {

using Coord = std::array<int, 3>;
using GridExtents = std::array<int, 3>;
using VoxelId = std::int64_t;

inline std::size_t grid_volume(const GridExtents& e) {
  return static_cast<std::size_t>(e[0]) * static_cast<std::size_t>(e[1]) * static_cast<std::size_t>(e[2]);
}

inline std::size_t flat_index(const Coord& c, const GridExtents& e) {
  return (static_cast<std::size_t>(c[0]) * static_cast<std::size_t>(e[1]) + static_cast<std::size_t>(c[1])) *
             static_cast<std::size_t>(e[2]) +
         static_cast<std::size_t>(c[2]);
}

// Nonvoid voxels at one resolution level: coordinate, feature row and a stable
// id per voxel. Row i of `features` belongs to coords[i] and ids[i].
struct SparseVoxelSet {
  std::vector<Coord> coords;
  Tensor features;  // [phi, C]
  std::vector<VoxelId> ids;
  GridExtents extents{};

  std::size_t size() const { return coords.size(); }
  std::size_t channels() const { return features.rank() == 2 ? features.dim(1) : 0; }

  // Throws when coordinates repeat or leave the grid, ids repeat, or the
  // row counts disagree.
  void validate() const;

  // Same voxels stored in a different order: row i of the result is row
  // order[i] of this set. Features stay on the tape.
  SparseVoxelSet permuted(std::span<const std::size_t> order) const;

  // Replaces the features, keeping coords/ids/extents.
  SparseVoxelSet with_features(Tensor new_features) const;

  // Row holding the given id.
  std::size_t row_of(VoxelId id) const;
};

// Dense [X, Y, Z, C] grid holding the set's features, zero elsewhere; stays on the tape.
Tensor densify(const SparseVoxelSet& set);

}  // namespace gcnv
