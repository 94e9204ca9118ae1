#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gcnv/blocks/tdnvt.hpp"
#include "gcnv/nonvoid/nonvoid.hpp"

namespace gcnv {

// Levels: 0 is the embedded grid, level i+1 is the output of encoder stage i's
// GCA-Down. Level l works at channels[min(l, stages-1)] and uses that stage's
// window and capacity.
struct ModelConfig {
  std::size_t stages = 4;
  std::vector<std::size_t> channels{12, 24, 48, 96};
  std::vector<int> window{4, 4, 4, 4};
  std::vector<std::size_t> capacity{16, 16, 16, 16};
  int pool = 2;
  std::size_t classes = 2;
  std::size_t heads = 4;
  double mlp_ratio = 2.0;
  // Levels 1..conv_levels extract with residual sparse convs, deeper ones with 3DNVT.
  std::size_t conv_levels = 1;
  DirectionSchedule schedule = DirectionSchedule::Sequential;
  EmbedConfig embed;
  std::uint64_t seed = 0;

  // Two stages, C = (12, 24), t = (4, 4), capacity 16, two classes.
  static ModelConfig toy();

  void validate() const;
  std::size_t level_channels(std::size_t level) const;
  TdnvtConfig level_tdnvt(std::size_t level) const;
  BlockConfig level_block(std::size_t level) const;
  // Input extents must be multiples of this.
  std::size_t required_divisor() const;
  void check_extents(const Extents& extents) const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

}  // namespace gcnv
