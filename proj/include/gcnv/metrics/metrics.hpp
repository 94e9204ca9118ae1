#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcnv/volume/volume.hpp"

namespace gcnv {

struct BinaryMask {
  Extents extents{};
  std::vector<std::uint8_t> bits;  // row-major, nonzero = foreground

  std::size_t count() const;
};

BinaryMask class_mask(const Extents& extents, std::span<const int> labels, int label);

struct OverlapScores {
  double dice = 0.0;
  double iou = 0.0;
};

// Both masks empty counts as perfect agreement (1, 1).
OverlapScores overlap_metrics(const BinaryMask& pred, const BinaryMask& truth);

struct SurfaceScores {
  double hd95 = 0.0;
  double nsd = 0.0;
};

// Foreground voxels with at least one background 6-neighbour; outside the
// grid counts as background.
BinaryMask surface_of(const BinaryMask& mask);

// Exact Euclidean distance (voxel units) from every voxel to the nearest set
// voxel of `mask`; +inf everywhere when the mask is empty.
std::vector<double> distance_to(const BinaryMask& mask);

// Linear-interpolation percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);

// HD95 over the pooled surface distances of both directions; NSD is the mean
// of the two directional fractions within `tolerance`. Both masks must be
// nonempty.
SurfaceScores surface_metrics(const BinaryMask& pred, const BinaryMask& truth, double tolerance = 1.0);

struct ClassMetrics {
  int label = 0;
  double dice = 0.0;
  double iou = 0.0;
  double hd95 = 0.0;  // NaN when exactly one mask is empty
  double nsd = 0.0;   // NaN when exactly one mask is empty
};

struct MetricReport {
  std::vector<ClassMetrics> classes;
  // Unweighted means over classes; NaN entries are skipped.
  double mean_dice = 0.0;
  double mean_iou = 0.0;
  double mean_hd95 = 0.0;
  double mean_nsd = 0.0;
  std::size_t attention_pairs = 0;
  double flops = 0.0;

  std::string to_csv() const;
  std::string to_json() const;
};

// Scores every label in 1..classes-1 (0 is background).
MetricReport evaluate_segmentation(const Extents& extents, std::span<const int> pred, std::span<const int> truth,
                                   std::size_t classes, double nsd_tolerance = 1.0);

}  // namespace gcnv
