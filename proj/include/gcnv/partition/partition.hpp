#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gcnv/nonvoid/sparse_voxel_set.hpp"

namespace gcnv {

// One nonempty t-cube. `rows` index into the partitioned SparseVoxelSet and
// are ordered by voxel id, so the partition does not depend on storage order.
struct Window {
  Coord index{};  // (floor(x/t), floor(y/t), floor(z/t))
  std::vector<std::size_t> rows;
};

struct WindowPartition {
  int window_size = 0;
  std::vector<Window> windows;  // lexicographic by index

  std::size_t voxel_count() const;
};

WindowPartition partition_windows(const SparseVoxelSet& voxels, int window_size);

// ceil(phi / capacity).
std::size_t subset_count(std::size_t phi, std::size_t capacity);

// Plane direction; each sorts along the axis normal to its plane.
enum class Direction { XY, XZ, YZ };
inline constexpr std::array<Direction, 3> kDirections{Direction::XY, Direction::XZ, Direction::YZ};

std::string_view to_string(Direction d);
// Axis sorted on: XY -> z, XZ -> y, YZ -> x.
int sort_axis(Direction d);

struct DirectionalSubsets {
  Direction direction = Direction::XY;
  std::size_t capacity = 0;
  std::vector<std::vector<std::size_t>> subsets;  // rows, in sorted order
};

// Sorts the window members by the direction axis, then the two remaining axes
// from highest axis index to lowest, then id, and cuts the sequence into runs
// of `capacity`.
DirectionalSubsets axis_partition(const SparseVoxelSet& voxels, const Window& window, Direction direction,
                                  std::size_t capacity);

enum class AttentionMode { Dense3d, TriDirectional };

std::size_t attention_pair_count(const SparseVoxelSet& voxels, const WindowPartition& partition, std::size_t capacity,
                                 AttentionMode mode);

struct PairCountReport {
  int window_size = 0;
  std::size_t capacity = 0;
  std::size_t windows = 0;
  std::size_t voxels = 0;
  std::size_t dense3d = 0;
  std::size_t tri_directional = 0;

  std::string to_json() const;
};

PairCountReport pair_count_report(const SparseVoxelSet& voxels, int window_size, std::size_t capacity);

}  // namespace gcnv
