#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "gcnv/volume/volume.hpp"

namespace gcnv {

enum class ShapeKind { Sphere, Box };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Sphere;
  std::array<double, 3> center{};
  // Sphere: radius in every entry. Box: half extents per axis.
  std::array<double, 3> size{1.0, 1.0, 1.0};
  int label = 1;
  // Foreground intensity range, applied to every channel.
  double intensity_lo = 0.5;
  double intensity_hi = 1.5;
};

struct PhantomSpec {
  Extents extents{16, 16, 16};
  std::size_t modalities = 1;
  // When set, the foreground is grown from the shapes (nearest voxels first,
  // by shape-normalized distance) until exactly this background fraction is
  // left. When unset, shapes are rasterized literally.
  std::optional<double> background_fraction;
  std::vector<ShapeSpec> shapes;
  // Per-channel background value; empty means 0 for every channel.
  std::vector<double> background;
  NormalizationScheme scheme = NormalizationScheme::MriMasked;
};

// Foreground values stay at least this far from the background value.
inline constexpr double kForegroundMargin = 0.1;

struct Phantom {
  std::uint64_t seed = 0;
  PhantomSpec spec;
  DenseVolume volume;
  // H*W*D class labels, 0 = background.
  std::vector<int> labels;

  double background_fraction() const;
};

Phantom generate_phantom(std::uint64_t seed, const PhantomSpec& spec);

// Spheres spread deterministically through the grid, for quick experiments.
PhantomSpec default_phantom_spec(Extents extents, double background_fraction, std::size_t modalities = 1);

}  // namespace gcnv
