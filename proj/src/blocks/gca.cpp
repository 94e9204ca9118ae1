#include "gcnv/blocks/gca.hpp"

#include <algorithm>
#include <map>

#include "gcnv/error.hpp"
#include "gcnv/partition/partition.hpp"
#include "gcnv/tensor/ops.hpp"

namespace gcnv {

GcaDown GcaDown::init(const BlockConfig& cfg, Rng& rng) {
  cfg.validate();
  return {Attention::init(cfg.channels, cfg.heads, rng), Mlp::init(cfg.channels, cfg.hidden(), rng)};
}

void GcaDown::for_each(const std::string& prefix, const ParamFn& fn) {
  attn.for_each(prefix + ".attn", fn);
  kv_mlp.for_each(prefix + ".kv_mlp", fn);
}

GcaUp GcaUp::init(const BlockConfig& cfg, Rng& rng) {
  cfg.validate();
  GcaUp g;
  g.q_mlp = Mlp::init(cfg.channels, cfg.hidden(), rng);
  g.attn = Attention::init(cfg.channels, cfg.heads, rng);
  g.out_mlp = Mlp::init(cfg.channels, cfg.hidden(), rng);
  return g;
}

void GcaUp::for_each(const std::string& prefix, const ParamFn& fn) {
  q_mlp.for_each(prefix + ".q_mlp", fn);
  attn.for_each(prefix + ".attn", fn);
  out_mlp.for_each(prefix + ".out_mlp", fn);
}

namespace {

GridExtents coarse_extents(const GridExtents& e, int pool) {
  return {(e[0] + pool - 1) / pool, (e[1] + pool - 1) / pool, (e[2] + pool - 1) / pool};
}

void check_channels(const SparseVoxelSet& s, const Attention& attn, const char* what) {
  if (s.channels() != attn.channels()) {
    fail(ErrorKind::Shape, std::string(what) + " expects " + std::to_string(attn.channels()) +
                               " channels, got features " + shape_string(s.features.shape()));
  }
}

}  // namespace

SparseVoxelSet gca_down(const SparseVoxelSet& fine, int pool, const GcaDown& p, CostCounter* cost,
                        const std::string& name) {
  require(pool >= 1, ErrorKind::InvalidArgument, "pooling stride must be >= 1");
  SparseVoxelSet out;
  out.extents = coarse_extents(fine.extents, pool);
  const std::size_t c = p.attn.channels();
  if (fine.size() == 0) {
    out.features = Tensor::zeros({0, c});
    return out;
  }
  check_channels(fine, p.attn, "GCA-Down");

  const auto part = partition_windows(fine, pool);
  const Tensor kv = apply(p.kv_mlp, add(fine.features, positional_rows(fine.coords, c)), cost, name);
  const Tensor k = apply(p.attn.k, kv, cost, name);
  const Tensor v = apply(p.attn.v, kv, cost, name);

  std::vector<Tensor> pooled;
  pooled.reserve(part.windows.size());
  for (const auto& w : part.windows) {
    pooled.push_back(reshape(max_rows(gather_rows(fine.features, w.rows)), {1, c}));
    out.coords.push_back(w.index);
    VoxelId id = fine.ids[w.rows.front()];
    for (auto r : w.rows) id = std::min(id, fine.ids[r]);
    out.ids.push_back(id);
  }
  const Tensor query = add(concat_rows(pooled), positional_rows(out.coords, c));
  const Tensor q = apply(p.attn.q, query, cost, name);

  std::vector<Tensor> ctx;
  ctx.reserve(part.windows.size());
  for (std::size_t j = 0; j < part.windows.size(); ++j) {
    const std::vector<std::size_t> qrow{j};
    const auto& rows = part.windows[j].rows;
    ctx.push_back(attention_core(gather_rows(q, qrow), gather_rows(k, rows), gather_rows(v, rows), p.attn.heads, cost, name));
  }
  out.features = apply(p.attn.o, concat_rows(ctx), cost, name);
  return out;
}

SparseVoxelSet gca_up(const SparseVoxelSet& fine, const SparseVoxelSet& coarse, int pool, const GcaUp& p,
                      CostCounter* cost, const std::string& name) {
  require(pool >= 1, ErrorKind::InvalidArgument, "pooling stride must be >= 1");
  if (fine.size() == 0) return fine;
  check_channels(fine, p.attn, "GCA-Up (fine)");
  check_channels(coarse, p.attn, "GCA-Up (coarse)");
  const std::size_t c = p.attn.channels();

  std::map<Coord, std::size_t> coarse_row;
  for (std::size_t i = 0; i < coarse.size(); ++i) coarse_row.emplace(coarse.coords[i], i);

  const Tensor q = apply(p.attn.q, apply(p.q_mlp, add(fine.features, positional_rows(fine.coords, c)), cost, name),
                         cost, name);
  const Tensor kv = add(coarse.features, positional_rows(coarse.coords, c));
  const Tensor k = apply(p.attn.k, kv, cost, name);
  const Tensor v = apply(p.attn.v, kv, cost, name);

  const auto part = partition_windows(fine, pool);
  std::vector<Tensor> ctx;
  std::vector<std::size_t> order;
  order.reserve(fine.size());
  for (const auto& w : part.windows) {
    auto it = coarse_row.find(w.index);
    if (it == coarse_row.end()) {
      fail(ErrorKind::InvalidArgument, "GCA-Up: no coarse voxel for window (" + std::to_string(w.index[0]) + ", " +
                                           std::to_string(w.index[1]) + ", " + std::to_string(w.index[2]) + ")");
    }
    const std::vector<std::size_t> krow{it->second};
    ctx.push_back(attention_core(gather_rows(q, w.rows), gather_rows(k, krow), gather_rows(v, krow), p.attn.heads, cost, name));
    order.insert(order.end(), w.rows.begin(), w.rows.end());
  }
  const Tensor attended = apply(p.attn.o, scatter_rows(concat_rows(ctx), order, fine.size()), cost, name);
  return fine.with_features(apply(p.out_mlp, attended, cost, name));
}

}  // namespace gcnv
