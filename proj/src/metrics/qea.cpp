#include "gcnv/metrics/qea.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "gcnv/error.hpp"

namespace gcnv {

PolygonSpec PolygonSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("polygon spec: ") + e.what());
  }
  PolygonSpec spec;
  try {
    for (const auto& a : j.at("axes")) {
      const std::string dir = a.at("direction").get<std::string>();
      AxisDirection d;
      if (dir == "higher") {
        d = AxisDirection::HigherBetter;
      } else if (dir == "lower") {
        d = AxisDirection::LowerBetter;
      } else {
        fail(ErrorKind::Format, "axis direction must be \"higher\" or \"lower\", got \"" + dir + "\"");
      }
      spec.axes.push_back({a.at("name").get<std::string>(), d});
    }
    for (const auto& m : j.at("methods")) {
      spec.methods.push_back(m.at("name").get<std::string>());
      spec.values.push_back(m.at("values").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("polygon spec: ") + e.what());
  }
  return spec;
}

double polygon_area(const std::vector<double>& radii) {
  const std::size_t k = radii.size();
  require(k >= 3, ErrorKind::InvalidArgument, "polygon needs at least 3 axes, got " + std::to_string(k));
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += radii[i] * radii[(i + 1) % k];
  return 0.5 * std::sin(2.0 * std::numbers::pi / static_cast<double>(k)) * s;
}

QeaResult qea(const PolygonSpec& spec) {
  const std::size_t k = spec.axes.size();
  require(k >= 3, ErrorKind::InvalidArgument, "polygon needs at least 3 axes, got " + std::to_string(k));
  require(!spec.methods.empty(), ErrorKind::InvalidArgument, "polygon spec has no methods");
  require(spec.values.size() == spec.methods.size(), ErrorKind::Shape, "one value row per method expected");
  for (std::size_t m = 0; m < spec.methods.size(); ++m) {
    require(spec.values[m].size() == k, ErrorKind::Shape,
            "method " + spec.methods[m] + " has " + std::to_string(spec.values[m].size()) + " values for " +
                std::to_string(k) + " axes");
    for (double v : spec.values[m])
      require(std::isfinite(v), ErrorKind::NonFinite, "method " + spec.methods[m] + " has a non-finite value");
  }

  QeaResult r;
  r.methods = spec.methods;
  r.radii.assign(spec.methods.size(), std::vector<double>(k));
  for (std::size_t a = 0; a < k; ++a) {
    r.axes.push_back(spec.axes[a].name);
    double lo = spec.values[0][a], hi = lo;
    for (const auto& row : spec.values) {
      lo = std::min(lo, row[a]);
      hi = std::max(hi, row[a]);
    }
    if (!(hi > lo)) fail(ErrorKind::Degenerate, "axis " + spec.axes[a].name + " is degenerate: all methods equal");
    for (std::size_t m = 0; m < spec.methods.size(); ++m) {
      const double v = spec.values[m][a];
      r.radii[m][a] = spec.axes[a].direction == AxisDirection::HigherBetter ? (v - lo) / (hi - lo) : (hi - v) / (hi - lo);
    }
  }
  for (const auto& row : r.radii) r.areas.push_back(polygon_area(row));
  return r;
}

std::string QeaResult::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(12) << "method";
  for (const auto& a : axes) os << ',' << a;
  os << ",area\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    os << methods[m];
    for (double r : radii[m]) os << ',' << r;
    os << ',' << areas[m] << '\n';
  }
  return os.str();
}

std::string QeaResult::to_json() const {
  nlohmann::ordered_json j;
  j["axes"] = axes;
  j["methods"] = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    j["methods"].push_back({{"name", methods[m]}, {"radii", radii[m]}, {"area", areas[m]}});
  }
  return j.dump(2) + "\n";
}

}  // namespace gcnv
