#include "gcnv/nonvoid/sparse_voxel_set.hpp"

#include <algorithm>
#include <unordered_set>

#include "gcnv/error.hpp"
#include "gcnv/tensor/ops.hpp"

namespace gcnv {

void SparseVoxelSet::validate() const {
  if (features.rank() != 2 || features.dim(0) != coords.size() || ids.size() != coords.size()) {
    fail(ErrorKind::Shape, "sparse set: " + std::to_string(coords.size()) + " coords, " + std::to_string(ids.size()) +
                               " ids, features " + shape_string(features.shape()));
  }
  std::unordered_set<std::size_t> seen_sites;
  std::unordered_set<VoxelId> seen_ids;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      if (coords[i][a] < 0 || coords[i][a] >= extents[a]) {
        fail(ErrorKind::InvalidArgument, "sparse set: coordinate outside grid at row " + std::to_string(i));
      }
    }
    if (!seen_sites.insert(flat_index(coords[i], extents)).second) {
      fail(ErrorKind::InvalidArgument, "sparse set: duplicate coordinate at row " + std::to_string(i));
    }
    if (!seen_ids.insert(ids[i]).second) fail(ErrorKind::InvalidArgument, "sparse set: duplicate id " + std::to_string(ids[i]));
  }
}

SparseVoxelSet SparseVoxelSet::permuted(std::span<const std::size_t> order) const {
  if (order.size() != size()) fail(ErrorKind::Shape, "sparse set: permutation has wrong length");
  SparseVoxelSet out;
  out.extents = extents;
  out.coords.reserve(order.size());
  out.ids.reserve(order.size());
  for (auto i : order) {
    out.coords.push_back(coords.at(i));
    out.ids.push_back(ids.at(i));
  }
  out.features = size() == 0 ? features : gather_rows(features, order);
  return out;
}

SparseVoxelSet SparseVoxelSet::with_features(Tensor new_features) const {
  SparseVoxelSet out = *this;
  out.features = std::move(new_features);
  if (out.features.rank() != 2 || out.features.dim(0) != size()) {
    fail(ErrorKind::Shape, "sparse set: replacement features " + shape_string(out.features.shape()) + " for " +
                               std::to_string(size()) + " voxels");
  }
  return out;
}

std::size_t SparseVoxelSet::row_of(VoxelId id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) fail(ErrorKind::InvalidArgument, "sparse set: unknown id " + std::to_string(id));
  return static_cast<std::size_t>(it - ids.begin());
}

Tensor densify(const SparseVoxelSet& set) {
  const std::size_t c = set.channels();
  const Shape dense{static_cast<std::size_t>(set.extents[0]), static_cast<std::size_t>(set.extents[1]),
                    static_cast<std::size_t>(set.extents[2]), c};
  if (set.size() == 0) return Tensor::zeros(dense);
  std::vector<std::size_t> sites(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) sites[i] = flat_index(set.coords[i], set.extents);
  return reshape(scatter_rows(set.features, sites, grid_volume(set.extents)), dense);
}

}  // namespace gcnv
