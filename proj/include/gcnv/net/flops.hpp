#pragma once

#include <map>
#include <string>
#include <vector>

#include "gcnv/net/model.hpp"

namespace gcnv {

// Occupancy structure of one forward pass, without features.
struct LevelStats {
  std::size_t voxels = 0;
  std::size_t tri_pairs = 0;  // one 3DNVT application at this level
};

struct StructureStats {
  std::size_t embedded_sites = 0;  // H' W' D'
  std::size_t modalities = 1;
  std::vector<LevelStats> levels;  // 0..stages
};

// Closed-form pair count of one 3DNVT pass over the given window sizes:
// 3 * sum_j (floor(phi_j / cap) cap^2 + (phi_j mod cap)^2).
std::size_t tri_pairs_closed_form(const std::vector<std::size_t>& window_sizes, std::size_t capacity);

StructureStats structure_stats(const DenseVolume& volume, const ModelConfig& cfg, const Tensor& embed_weights,
                               bool dense_forced);

struct FlopReport {
  std::map<std::string, double> layers;
  double total = 0.0;

  std::string to_json() const;
};

// One multiply-accumulate = 2 FLOPs; norms, activations, softmax and
// additions are not counted. Layer names match the forward pass counters.
FlopReport count_flops(const ModelConfig& cfg, const StructureStats& stats);

}  // namespace gcnv
