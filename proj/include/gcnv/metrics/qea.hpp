#pragma once

#include <string>
#include <vector>

namespace gcnv {

enum class AxisDirection { HigherBetter, LowerBetter };

struct PolygonAxis {
  std::string name;
  AxisDirection direction = AxisDirection::HigherBetter;
};

// Axis order is the declaration order; the enclosed area depends on it.
struct PolygonSpec {
  std::vector<PolygonAxis> axes;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> values;  // [method][axis]

  static PolygonSpec from_json(const std::string& text);
};

struct QeaResult {
  std::vector<std::string> axes;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> radii;  // [method][axis], each in [0, 1]
  std::vector<double> areas;

  std::string to_csv() const;
  // Axis names and radii for radar plots, plus the areas.
  std::string to_json() const;
};

// Min-max normalization per axis (flipped for lower-better axes), then
// area = 1/2 sin(2 pi / K) sum_i r_i r_{i+1} around the closed polygon.
QeaResult qea(const PolygonSpec& spec);

double polygon_area(const std::vector<double>& radii);

}  // namespace gcnv
