#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcnv/nonvoid/sparse_voxel_set.hpp"
#include "gcnv/tensor/tensor.hpp"
#include "gcnv/volume/volume.hpp"

namespace gcnv {

struct EmbedConfig {
  std::size_t kernel = 2;
  std::size_t stride = 2;
  std::size_t channels = 12;
  double epsilon = 1e-5;
  int norm_order = 2;
  double temperature = 1.0;  // soft occupancy gate
  double lambda = 0.01;      // weight of the soft nonvoid ratio in the loss

  void validate() const;
};

// Bias-free embedding kernel [k, k, k, M, C], uniform in +-1/sqrt(k^3 M).
Tensor init_embedding_weights(const EmbedConfig& cfg, std::size_t modalities, std::uint64_t seed);

// Conv3D_{k,s,C}(X - b) without bias; returns [H', W', D', C]. The result is
// tracked when `weights` is.
Tensor embed_volume(const DenseVolume& volume, std::span<const double> background, const Tensor& weights,
                    const EmbedConfig& cfg);

struct OccupancyMap {
  GridExtents extents{};
  std::vector<std::uint8_t> bits;

  std::size_t popcount() const;
  bool at(const Coord& c) const { return bits[flat_index(c, extents)] != 0; }
};

// Bit set iff the l_p norm of the feature vector exceeds epsilon.
OccupancyMap compute_occupancy(const Tensor& features, const EmbedConfig& cfg);
OccupancyMap full_occupancy(GridExtents extents);

// One voxel per set bit, in lexicographic (x, y, z) order; ids are the scan
// ranks 0..phi-1. Features are gathered on the feature map's tape.
SparseVoxelSet voxelize(const Tensor& features, const OccupancyMap& occupancy);

// r_nv = mean_i sigmoid((||F(i)||_p - eps) / temperature) over all embedded voxels.
Tensor soft_nonvoid_ratio(const Tensor& features, const EmbedConfig& cfg);

// L_seg + lambda * r_nv.
Tensor total_loss(const Tensor& seg_loss, const Tensor& nonvoid_ratio, double lambda);

// 1 - nonvoid / traditional.
double saving_from_counts(double nonvoid, double traditional);

struct VoxelSavingRow {
  std::string name;
  double nonzero_ratio = 0.0;  // fraction of voxels differing from b in some channel
  double cropped_ratio = 0.0;  // bounding box of those voxels / all voxels
  double nonvoid = 0.0;
  double traditional = 0.0;
  double saving = 0.0;
};

struct VoxelSavingTable {
  std::vector<VoxelSavingRow> rows;
  // Means over rows; saving from the mean counts.
  VoxelSavingRow aggregate;
};

struct NamedVolume {
  std::string name;
  DenseVolume volume;
};

VoxelSavingRow voxel_saving_row(const std::string& name, const DenseVolume& volume, const Tensor& weights,
                                const EmbedConfig& cfg);

// Embeds every volume with weights drawn from `weight_seed` (one draw per
// modality count) and tabulates the savings.
VoxelSavingTable voxel_saving_stats(std::span<const NamedVolume> volumes, const EmbedConfig& cfg,
                                    std::uint64_t weight_seed);

std::string to_csv(const VoxelSavingTable& table);
std::string to_json(const VoxelSavingTable& table);

struct EpsilonPoint {
  double epsilon = 0.0;
  double saving = 0.0;
  std::size_t nonvoid = 0;
};

// Saving for every threshold of a strictly increasing positive grid.
std::vector<EpsilonPoint> epsilon_sweep(const DenseVolume& volume, const Tensor& weights, const EmbedConfig& cfg,
                                        std::span<const double> epsilons);

// Decades from 1e-11 to 1e1.
std::vector<double> default_epsilon_grid();

}  // namespace gcnv
