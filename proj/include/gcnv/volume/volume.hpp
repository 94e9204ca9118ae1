#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcnv/tensor/tensor.hpp"

namespace gcnv {

// Intensity normalization applied upstream; decides how the background
// constant is obtained.
enum class NormalizationScheme { CT, MriMasked, MriUnmasked };

std::string_view to_string(NormalizationScheme scheme);
NormalizationScheme parse_scheme(std::string_view tag);

struct NormalizationRecord {
  NormalizationScheme scheme = NormalizationScheme::MriMasked;
  // Per-channel global statistics; required for CT.
  std::optional<std::vector<double>> mean;
  std::optional<std::vector<double>> stddev;
  std::optional<std::vector<double>> p0_5;

  bool operator==(const NormalizationRecord&) const = default;
};

using Extents = std::array<std::size_t, 3>;

// H x W x D grid with M channels, stored as a [H, W, D, M] tensor.
class DenseVolume {
 public:
  DenseVolume(Tensor intensities, NormalizationRecord meta);

  const Extents& extents() const { return extents_; }
  std::size_t modalities() const { return modalities_; }
  std::size_t voxel_count() const { return extents_[0] * extents_[1] * extents_[2]; }
  const Tensor& intensities() const { return intensities_; }
  const NormalizationRecord& meta() const { return meta_; }

  double at(std::size_t x, std::size_t y, std::size_t z, std::size_t m) const {
    return intensities_[((x * extents_[1] + y) * extents_[2] + z) * modalities_ + m];
  }

 private:
  Extents extents_{};
  std::size_t modalities_ = 0;
  Tensor intensities_;
  NormalizationRecord meta_;
};

// Number of uniform bins used for the histogram-mode estimate.
inline constexpr std::size_t kHistogramBins = 512;

// Per-channel value that represents empty space after normalization.
std::vector<double> derive_background_constant(const DenseVolume& volume);

// Most frequent value of one channel: the fullest of kHistogramBins bins over
// [min, max] (ties toward the lower bin), then the most frequent exact value
// inside that bin (ties toward the smaller value).
double histogram_mode(std::span<const double> values);

// Raw little-endian float32 payload plus a JSON sidecar. `path` may name either
// file; the other is derived by swapping the .raw/.json extension.
void write_volume(const DenseVolume& volume, const std::string& path);
DenseVolume read_volume(const std::string& path);

std::string raw_path_for(const std::string& path);
std::string sidecar_path_for(const std::string& path);

}  // namespace gcnv
