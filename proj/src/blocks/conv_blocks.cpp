#include "gcnv/blocks/conv_blocks.hpp"

#include <cmath>
#include <unordered_map>

#include "gcnv/error.hpp"

namespace gcnv {

Rulebook submanifold_rulebook(const SparseVoxelSet& voxels, int kernel) {
  require(kernel >= 1 && kernel % 2 == 1, ErrorKind::InvalidArgument, "submanifold kernel must be odd");
  const int r = kernel / 2;
  std::unordered_map<std::size_t, std::size_t> row_at;
  row_at.reserve(voxels.size() * 2);
  for (std::size_t i = 0; i < voxels.size(); ++i) row_at.emplace(flat_index(voxels.coords[i], voxels.extents), i);

  Rulebook rb;
  rb.kernel_volume = static_cast<std::size_t>(kernel * kernel * kernel);
  rb.in_rows = rb.out_rows = voxels.size();
  rb.pairs.resize(rb.kernel_volume);
  for (std::size_t out = 0; out < voxels.size(); ++out) {
    const auto& c = voxels.coords[out];
    std::size_t o = 0;
    for (int dx = -r; dx <= r; ++dx)
      for (int dy = -r; dy <= r; ++dy)
        for (int dz = -r; dz <= r; ++dz, ++o) {
          const Coord n{c[0] + dx, c[1] + dy, c[2] + dz};
          bool inside = true;
          for (int a = 0; a < 3; ++a) inside = inside && n[a] >= 0 && n[a] < voxels.extents[a];
          if (!inside) continue;
          auto it = row_at.find(flat_index(n, voxels.extents));
          if (it != row_at.end()) rb.pairs[o].emplace_back(it->second, out);
        }
  }
  return rb;
}

ResidualConv ResidualConv::init(std::size_t channels, Rng& rng) {
  const double bound = 1.0 / std::sqrt(27.0 * static_cast<double>(channels));
  ResidualConv b;
  b.w1 = rng.uniform_tensor({27, channels, channels}, -bound, bound);
  b.n1 = Norm::init(channels);
  b.w2 = rng.uniform_tensor({27, channels, channels}, -bound, bound);
  b.n2 = Norm::init(channels);
  return b;
}

void ResidualConv::for_each(const std::string& prefix, const ParamFn& fn) {
  fn(prefix + ".w1", w1);
  n1.for_each(prefix + ".n1", fn);
  fn(prefix + ".w2", w2);
  n2.for_each(prefix + ".n2", fn);
}

namespace {

// Sites times kernel volume times channel product, the same rule for the
// sparse and dense variants so the two are comparable.
void count_conv(CostCounter* cost, const std::string& name, std::size_t sites, std::size_t c) {
  if (cost) cost->add(name, 2.0 * 27.0 * static_cast<double>(sites * c * c));
}

}  // namespace

SparseVoxelSet residual_sparse_conv(const SparseVoxelSet& voxels, const ResidualConv& p, CostCounter* cost,
                                    const std::string& name) {
  if (voxels.size() == 0) return voxels;
  if (voxels.channels() != p.channels()) {
    fail(ErrorKind::Shape, "residual conv expects " + std::to_string(p.channels()) + " channels, got features " +
                               shape_string(voxels.features.shape()));
  }
  const Rulebook rb = submanifold_rulebook(voxels, 3);
  const Tensor& x = voxels.features;
  count_conv(cost, name, voxels.size(), p.channels());
  const Tensor h = gelu(apply(p.n1, sparse_conv(x, rb, p.w1)));
  count_conv(cost, name, voxels.size(), p.channels());
  const Tensor y = gelu(apply(p.n2, sparse_conv(h, rb, p.w2)));
  return voxels.with_features(add(x, y));
}

Tensor residual_dense_conv(const Tensor& grid, const ResidualConv& p, CostCounter* cost, const std::string& name) {
  if (grid.rank() != 4 || grid.dim(3) != p.channels()) {
    fail(ErrorKind::Shape, "dense residual conv expects [X, Y, Z, " + std::to_string(p.channels()) + "], got " +
                               shape_string(grid.shape()));
  }
  const std::size_t c = p.channels();
  const Shape kshape{3, 3, 3, c, c};
  const Shape rows{grid.dim(0) * grid.dim(1) * grid.dim(2), c};
  auto stage = [&](const Tensor& in, const Tensor& w, const Norm& n) {
    count_conv(cost, name, rows[0], c);
    const Tensor conv = conv3d(in, reshape(w, kshape), 1, 1);
    return reshape(gelu(apply(n, reshape(conv, rows))), grid.shape());
  };
  return add(grid, stage(stage(grid, p.w1, p.n1), p.w2, p.n2));
}

}  // namespace gcnv
