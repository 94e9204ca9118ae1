#include "gcnv/partition/partition.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include <json.hpp>

#include "gcnv/error.hpp"

namespace gcnv {

std::size_t WindowPartition::voxel_count() const {
  std::size_t n = 0;
  for (const auto& w : windows) n += w.rows.size();
  return n;
}

WindowPartition partition_windows(const SparseVoxelSet& voxels, int window_size) {
  require(window_size >= 1, ErrorKind::InvalidArgument, "window size must be >= 1");
  std::map<Coord, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const auto& c = voxels.coords[i];
    cells[{c[0] / window_size, c[1] / window_size, c[2] / window_size}].push_back(i);
  }
  WindowPartition out;
  out.window_size = window_size;
  out.windows.reserve(cells.size());
  for (auto& [index, rows] : cells) {
    std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) { return voxels.ids[a] < voxels.ids[b]; });
    out.windows.push_back({index, std::move(rows)});
  }
  return out;
}

std::size_t subset_count(std::size_t phi, std::size_t capacity) {
  require(capacity >= 1, ErrorKind::InvalidArgument, "subset capacity must be >= 1");
  return phi / capacity + (phi % capacity > 0 ? 1 : 0);
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::XY: return "XY";
    case Direction::XZ: return "XZ";
    case Direction::YZ: return "YZ";
  }
  return "?";
}

int sort_axis(Direction d) {
  switch (d) {
    case Direction::XY: return 2;
    case Direction::XZ: return 1;
    case Direction::YZ: return 0;
  }
  return 2;
}

DirectionalSubsets axis_partition(const SparseVoxelSet& voxels, const Window& window, Direction direction,
                                  std::size_t capacity) {
  require(!window.rows.empty(), ErrorKind::InvalidArgument, "axis partition of an empty window");
  require(capacity >= 1, ErrorKind::InvalidArgument, "subset capacity must be >= 1");
  const int a = sort_axis(direction);
  // remaining axes, highest index first
  int r[2], k = 0;
  for (int axis = 2; axis >= 0; --axis)
    if (axis != a) r[k++] = axis;

  std::vector<std::size_t> order = window.rows;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& ci = voxels.coords[i];
    const auto& cj = voxels.coords[j];
    return std::make_tuple(ci[a], ci[r[0]], ci[r[1]], voxels.ids[i]) <
           std::make_tuple(cj[a], cj[r[0]], cj[r[1]], voxels.ids[j]);
  });

  DirectionalSubsets out;
  out.direction = direction;
  out.capacity = capacity;
  out.subsets.reserve(subset_count(order.size(), capacity));
  for (std::size_t begin = 0; begin < order.size(); begin += capacity) {
    const std::size_t end = std::min(order.size(), begin + capacity);
    out.subsets.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::size_t attention_pair_count(const SparseVoxelSet& voxels, const WindowPartition& partition, std::size_t capacity,
                                 AttentionMode mode) {
  std::size_t pairs = 0;
  for (const auto& w : partition.windows) {
    if (mode == AttentionMode::Dense3d) {
      pairs += w.rows.size() * w.rows.size();
      continue;
    }
    for (auto d : kDirections) {
      for (const auto& s : axis_partition(voxels, w, d, capacity).subsets) pairs += s.size() * s.size();
    }
  }
  return pairs;
}

PairCountReport pair_count_report(const SparseVoxelSet& voxels, int window_size, std::size_t capacity) {
  const auto part = partition_windows(voxels, window_size);
  PairCountReport r;
  r.window_size = window_size;
  r.capacity = capacity;
  r.windows = part.windows.size();
  r.voxels = voxels.size();
  r.dense3d = attention_pair_count(voxels, part, capacity, AttentionMode::Dense3d);
  r.tri_directional = attention_pair_count(voxels, part, capacity, AttentionMode::TriDirectional);
  return r;
}

std::string PairCountReport::to_json() const {
  nlohmann::ordered_json j;
  j["window_size"] = window_size;
  j["capacity"] = capacity;
  j["windows"] = windows;
  j["voxels"] = voxels;
  j["dense3d_pairs"] = dense3d;
  j["tri_directional_pairs"] = tri_directional;
  j["reduction_factor"] = tri_directional == 0 ? 0.0 : static_cast<double>(dense3d) / static_cast<double>(tri_directional);
  return j.dump(2) + "\n";
}

}  // namespace gcnv
