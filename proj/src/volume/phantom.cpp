#include "gcnv/volume/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gcnv/error.hpp"
#include "gcnv/tensor/random.hpp"

namespace gcnv {
namespace {

// Distance scaled so the shape boundary sits at 1.
double normalized_distance(const ShapeSpec& s, double x, double y, double z) {
  const double d[3] = {x - s.center[0], y - s.center[1], z - s.center[2]};
  if (s.kind == ShapeKind::Sphere) return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / s.size[0];
  double m = 0.0;
  for (int a = 0; a < 3; ++a) m = std::max(m, std::abs(d[a]) / s.size[a]);
  return m;
}

void validate(const PhantomSpec& spec) {
  for (auto e : spec.extents)
    if (e < 1) fail(ErrorKind::InvalidArgument, "phantom extents must be >= 1");
  if (spec.modalities < 1) fail(ErrorKind::InvalidArgument, "phantom needs at least one modality");
  if (spec.background_fraction && !(*spec.background_fraction >= 0.0 && *spec.background_fraction < 1.0)) {
    fail(ErrorKind::InvalidArgument, "background_fraction must lie in [0, 1)");
  }
  if (!spec.background.empty() && spec.background.size() != spec.modalities) {
    fail(ErrorKind::InvalidArgument, "background needs one value per modality");
  }
  if (spec.shapes.empty()) fail(ErrorKind::InvalidArgument, "phantom geometry has no shapes");
  for (const auto& s : spec.shapes) {
    if (s.label < 1) fail(ErrorKind::InvalidArgument, "shape labels must be >= 1");
    if (!(s.intensity_hi >= s.intensity_lo)) fail(ErrorKind::InvalidArgument, "shape intensity range is empty");
    for (int a = 0; a < 3; ++a) {
      const double r = s.kind == ShapeKind::Sphere ? s.size[0] : s.size[a];
      if (!(r > 0.0)) fail(ErrorKind::InvalidArgument, "shape size must be positive");
      const double lo = s.center[a] - r, hi = s.center[a] + r;
      if (lo < -0.5 || hi > static_cast<double>(spec.extents[a]) - 0.5) {
        fail(ErrorKind::InvalidArgument, "geometry cannot fit in extents: shape centered at (" +
                                             std::to_string(s.center[0]) + ", " + std::to_string(s.center[1]) + ", " +
                                             std::to_string(s.center[2]) + ") leaves the grid on axis " +
                                             std::to_string(a));
      }
    }
  }
}

// Draws from [lo, hi] while staying kForegroundMargin away from `bg`; the
// result is float32-representable so it survives the file format exactly.
double draw_intensity(Rng& rng, const ShapeSpec& s, double bg) {
  const double band_lo = bg - kForegroundMargin, band_hi = bg + kForegroundMargin;
  const double below = std::max(0.0, std::min(s.intensity_hi, band_lo) - s.intensity_lo);
  const double above = std::max(0.0, s.intensity_hi - std::max(s.intensity_lo, band_hi));
  if (below + above <= 0.0) {
    if (s.intensity_lo == s.intensity_hi && std::abs(s.intensity_lo - bg) >= kForegroundMargin) {
      return static_cast<float>(s.intensity_lo);
    }
    fail(ErrorKind::InvalidArgument, "shape intensity range lies inside the background margin band");
  }
  for (;;) {
    const double u = rng.uniform(0.0, below + above);
    const double v = u < below ? s.intensity_lo + u : std::max(s.intensity_lo, band_hi) + (u - below);
    const double f = static_cast<float>(v);
    if (std::abs(f - bg) >= kForegroundMargin) return f;
  }
}

}  // namespace

double Phantom::background_fraction() const {
  const auto bg = static_cast<double>(std::count(labels.begin(), labels.end(), 0));
  return bg / static_cast<double>(labels.size());
}

Phantom generate_phantom(std::uint64_t seed, const PhantomSpec& spec) {
  validate(spec);
  const auto [nx, ny, nz] = spec.extents;
  const std::size_t n = nx * ny * nz;
  const std::size_t m = spec.modalities;
  std::vector<double> bg(m, 0.0);
  for (std::size_t c = 0; c < spec.background.size(); ++c) bg[c] = static_cast<float>(spec.background[c]);

  // Nearest shape per voxel in normalized distance (first shape wins ties).
  std::vector<double> dist(n);
  std::vector<std::size_t> owner(n);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t z = 0; z < nz; ++z) {
        const std::size_t i = (x * ny + y) * nz + z;
        dist[i] = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
          const double d = normalized_distance(spec.shapes[k], static_cast<double>(x), static_cast<double>(y),
                                               static_cast<double>(z));
          if (d < dist[i]) {
            dist[i] = d;
            owner[i] = k;
          }
        }
      }

  std::vector<int> labels(n, 0);
  if (spec.background_fraction) {
    const auto background = static_cast<std::size_t>(std::llround(*spec.background_fraction * static_cast<double>(n)));
    const std::size_t foreground = n - std::min(background, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    for (std::size_t r = 0; r < foreground; ++r) labels[order[r]] = spec.shapes[owner[order[r]]].label;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (dist[i] <= 1.0) labels[i] = spec.shapes[owner[i]].label;
  }

  Rng rng(seed);
  std::vector<double> values(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < m; ++c)
      values[i * m + c] = labels[i] == 0 ? bg[c] : draw_intensity(rng, spec.shapes[owner[i]], bg[c]);

  NormalizationRecord meta;
  meta.scheme = spec.scheme;
  DenseVolume volume(Tensor({nx, ny, nz, m}, std::move(values)), meta);
  return Phantom{seed, spec, std::move(volume), std::move(labels)};
}

PhantomSpec default_phantom_spec(Extents extents, double background_fraction, std::size_t modalities) {
  PhantomSpec spec;
  spec.extents = extents;
  spec.modalities = modalities;
  spec.background_fraction = background_fraction;
  const double smallest = static_cast<double>(*std::min_element(extents.begin(), extents.end()));
  auto at = [&](double fx, double fy, double fz) {
    return std::array<double, 3>{fx * (static_cast<double>(extents[0]) - 1), fy * (static_cast<double>(extents[1]) - 1),
                                 fz * (static_cast<double>(extents[2]) - 1)};
  };
  ShapeSpec a;
  a.kind = ShapeKind::Sphere;
  a.center = at(0.4, 0.42, 0.45);
  a.size = {0.25 * smallest, 0.25 * smallest, 0.25 * smallest};
  a.intensity_lo = 0.4;
  a.intensity_hi = 1.6;
  ShapeSpec b;
  b.kind = ShapeKind::Box;
  b.center = at(0.7, 0.62, 0.58);
  b.size = {0.15 * smallest, 0.2 * smallest, 0.12 * smallest};
  b.intensity_lo = -1.6;
  b.intensity_hi = -0.4;
  spec.shapes = {a, b};
  return spec;
}

}  // namespace gcnv
