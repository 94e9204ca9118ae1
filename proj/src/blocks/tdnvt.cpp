#include "gcnv/blocks/tdnvt.hpp"

#include "gcnv/error.hpp"
#include "gcnv/tensor/ops.hpp"

namespace gcnv {

void TdnvtConfig::validate() const {
  block.validate();
  require(window >= 1, ErrorKind::InvalidArgument, "window size must be >= 1");
  require(capacity >= 1, ErrorKind::InvalidArgument, "subset capacity must be >= 1");
}

void TdnvtDirection::for_each(const std::string& prefix, const ParamFn& fn) {
  norm1.for_each(prefix + ".norm1", fn);
  attn.for_each(prefix + ".attn", fn);
  norm2.for_each(prefix + ".norm2", fn);
  mlp.for_each(prefix + ".mlp", fn);
}

TdnvtBlock TdnvtBlock::init(const BlockConfig& cfg, Rng& rng) {
  cfg.validate();
  TdnvtBlock b;
  for (auto& d : b.directions) {
    d.norm1 = Norm::init(cfg.channels);
    d.attn = Attention::init(cfg.channels, cfg.heads, rng);
    d.norm2 = Norm::init(cfg.channels);
    d.mlp = Mlp::init(cfg.channels, cfg.hidden(), rng);
  }
  return b;
}

void TdnvtBlock::for_each(const std::string& prefix, const ParamFn& fn) {
  for (std::size_t i = 0; i < 3; ++i) directions[i].for_each(prefix + "." + std::string(to_string(kDirections[i])), fn);
}

Tensor tdnvt_direction(const SparseVoxelSet& voxels, const Tensor& x, const WindowPartition& partition,
                       Direction direction, const TdnvtDirection& p, std::size_t capacity, CostCounter* cost,
                       const std::string& name) {
  const std::size_t n = voxels.size();
  const std::size_t c = p.attn.channels();
  const Tensor u = add(apply(p.norm1, x), positional_rows(voxels.coords, c));
  const Tensor q = apply(p.attn.q, u, cost, name);
  const Tensor k = apply(p.attn.k, u, cost, name);
  const Tensor v = apply(p.attn.v, u, cost, name);

  std::vector<Tensor> parts;
  std::vector<std::size_t> order;
  order.reserve(n);
  for (const auto& w : partition.windows) {
    for (const auto& rows : axis_partition(voxels, w, direction, capacity).subsets) {
      parts.push_back(attention_core(gather_rows(q, rows), gather_rows(k, rows), gather_rows(v, rows), p.attn.heads,
                                     cost, name));
      order.insert(order.end(), rows.begin(), rows.end());
    }
  }
  const Tensor ctx = scatter_rows(concat_rows(parts), order, n);
  const Tensor x1 = add(x, apply(p.attn.o, ctx, cost, name));
  return add(x1, apply(p.mlp, apply(p.norm2, x1), cost, name));
}

SparseVoxelSet tdnvt_block(const SparseVoxelSet& voxels, const TdnvtBlock& params, const TdnvtConfig& cfg,
                           CostCounter* cost, const std::string& name) {
  cfg.validate();
  if (voxels.size() == 0) return voxels;
  if (voxels.channels() != cfg.block.channels) {
    fail(ErrorKind::Shape, "3DNVT block expects " + std::to_string(cfg.block.channels) + " channels, got features " +
                               shape_string(voxels.features.shape()));
  }
  const auto partition = partition_windows(voxels, cfg.window);
  const Tensor& x0 = voxels.features;
  Tensor x = x0;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string dname = name + "." + std::string(to_string(kDirections[i]));
    if (cfg.schedule == DirectionSchedule::Sequential) {
      x = tdnvt_direction(voxels, x, partition, kDirections[i], params.directions[i], cfg.capacity, cost, dname);
    } else {
      const Tensor y = tdnvt_direction(voxels, x0, partition, kDirections[i], params.directions[i], cfg.capacity, cost, dname);
      x = add(x, sub(y, x0));
    }
  }
  return voxels.with_features(x);
}

}  // namespace gcnv
