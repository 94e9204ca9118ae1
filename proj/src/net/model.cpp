#include "gcnv/net/model.hpp"

#include <algorithm>
#include <map>

#include "gcnv/error.hpp"
#include "gcnv/tensor/ops.hpp"

namespace gcnv {

void LevelExtractor::for_each(const std::string& prefix, const ParamFn& fn) {
  if (use_conv) {
    conv.for_each(prefix + ".conv", fn);
  } else {
    tdnvt.for_each(prefix + ".tdnvt", fn);
  }
}

void ModelWeights::for_each(const std::string& prefix, const ParamFn& fn) {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  fn(p + "embed", embed);
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const std::string n = std::to_string(i);
    encoder[i].for_each(p + "encoder." + n, fn);
    down[i].for_each(p + "down." + n, fn);
    if (down_proj[i]) down_proj[i]->for_each(p + "down_proj." + n, fn);
    extract[i].for_each(p + "extract." + std::to_string(i + 1), fn);
    if (up_proj[i]) up_proj[i]->for_each(p + "up_proj." + n, fn);
    up[i].for_each(p + "up." + n, fn);
  }
  head.for_each(p + "head", fn);
  fn(p + "fill", fill);
}

std::size_t ModelWeights::parameter_count() {
  std::size_t n = 0;
  for_each("", [&](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

ModelWeights init_weights(const ModelConfig& cfg, std::size_t modalities) {
  cfg.validate();
  require(modalities >= 1, ErrorKind::InvalidArgument, "need at least one modality");
  ModelWeights w;
  w.embed = init_embedding_weights(cfg.embed, modalities, cfg.seed);
  Rng rng(cfg.seed + 1);
  for (std::size_t i = 0; i < cfg.stages; ++i) {
    const std::size_t c = cfg.level_channels(i), next = cfg.level_channels(i + 1);
    w.encoder.push_back(TdnvtBlock::init(cfg.level_block(i), rng));
    w.down.push_back(GcaDown::init(cfg.level_block(i), rng));
    w.down_proj.push_back(c == next ? std::nullopt : std::optional<Linear>(Linear::init(c, next, rng)));
    LevelExtractor ex;
    ex.use_conv = i + 1 <= cfg.conv_levels;
    if (ex.use_conv) {
      ex.conv = ResidualConv::init(next, rng);
    } else {
      ex.tdnvt = TdnvtBlock::init(cfg.level_block(i + 1), rng);
    }
    w.extract.push_back(std::move(ex));
    w.up_proj.push_back(c == next ? std::nullopt : std::optional<Linear>(Linear::init(next, c, rng)));
    w.up.push_back(GcaUp::init(cfg.level_block(i), rng));
  }
  w.head = Linear::init(cfg.channels[0], cfg.classes, rng);
  w.fill = Tensor::zeros({cfg.classes});
  return w;
}

void save_weights(ModelWeights weights, const std::string& path) {
  NamedTensors out;
  weights.for_each("", [&](const std::string& name, Tensor& t) { out.emplace_back(name, t.detach()); });
  write_tensor_bundle(out, path);
}

ModelWeights load_weights(const ModelConfig& cfg, std::size_t modalities, const std::string& path) {
  std::map<std::string, Tensor> stored;
  for (auto& [name, t] : read_tensor_bundle(path)) stored.emplace(name, t);
  ModelWeights w = init_weights(cfg, modalities);
  std::size_t used = 0;
  w.for_each("", [&](const std::string& name, Tensor& t) {
    auto it = stored.find(name);
    if (it == stored.end()) fail(ErrorKind::Format, "weights: missing tensor '" + name + "'");
    if (it->second.shape() != t.shape()) {
      fail(ErrorKind::Format, "weights: '" + name + "' has shape " + shape_string(it->second.shape()) + ", expected " +
                                  shape_string(t.shape()));
    }
    t = it->second;
    ++used;
  });
  if (used != stored.size()) fail(ErrorKind::Format, "weights: bundle has tensors the config does not use");
  return w;
}

namespace {

SparseVoxelSet project(const SparseVoxelSet& s, const std::optional<Linear>& proj, CostCounter* cost,
                       const std::string& name) {
  if (!proj) return s;
  if (s.size() == 0) return s.with_features(Tensor::zeros({0, proj->out()}));
  return s.with_features(apply(*proj, s.features, cost, name));
}

}  // namespace

ForwardResult forward(const DenseVolume& volume, const ModelConfig& cfg, const ModelWeights& weights,
                      const ForwardOptions& options) {
  cfg.validate();
  cfg.check_extents(volume.extents());
  ForwardResult r;
  CostCounter* cost = &r.cost;

  const auto b = derive_background_constant(volume);
  r.embedded = embed_volume(volume, b, weights.embed, cfg.embed);
  const GridExtents ge{static_cast<int>(r.embedded.dim(0)), static_cast<int>(r.embedded.dim(1)),
                       static_cast<int>(r.embedded.dim(2))};
  const double k3 = static_cast<double>(cfg.embed.kernel * cfg.embed.kernel * cfg.embed.kernel);
  cost->add("embed", 2.0 * static_cast<double>(grid_volume(ge)) * k3 * static_cast<double>(volume.modalities()) *
                         static_cast<double>(cfg.channels[0]));
  r.occupancy = options.dense_forced ? full_occupancy(ge) : compute_occupancy(r.embedded, cfg.embed);

  SparseVoxelSet v = voxelize(r.embedded, r.occupancy);
  r.levels.push_back(v);
  std::vector<SparseVoxelSet> skips;
  for (std::size_t i = 0; i < cfg.stages; ++i) {
    const std::string n = std::to_string(i);
    SparseVoxelSet h = tdnvt_block(v, weights.encoder[i], cfg.level_tdnvt(i), cost, "encoder." + n);
    skips.push_back(h);
    SparseVoxelSet g = project(gca_down(h, cfg.pool, weights.down[i], cost, "down." + n), weights.down_proj[i], cost,
                               "down_proj." + n);
    const std::string en = "extract." + std::to_string(i + 1);
    const auto& ex = weights.extract[i];
    v = ex.use_conv ? residual_sparse_conv(g, ex.conv, cost, en) : tdnvt_block(g, ex.tdnvt, cfg.level_tdnvt(i + 1), cost, en);
    r.levels.push_back(v);
  }

  SparseVoxelSet d = v;
  for (std::size_t l = cfg.stages; l-- > 0;) {
    const std::string n = std::to_string(l);
    const SparseVoxelSet& skip = skips[l];
    if (skip.size() == 0) {
      d = skip;
      continue;
    }
    const SparseVoxelSet coarse = project(d, weights.up_proj[l], cost, "up_proj." + n);
    const SparseVoxelSet u = gca_up(skip, coarse, cfg.pool, weights.up[l], cost, "up." + n);
    d = skip.with_features(add(skip.features, u.features));
  }
  r.decoded = d;

  const std::size_t k = cfg.classes;
  const Tensor fill_row = reshape(weights.fill, {1, k});
  Tensor table = fill_row;
  if (d.size() > 0) {
    const std::vector<Tensor> parts{apply(weights.head, d.features, cost, "head"), fill_row};
    table = concat_rows(parts);
  }

  // Row of every embedded site in the table; void sites point at the fill row.
  std::vector<std::size_t> site_row(grid_volume(ge), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) site_row[flat_index(d.coords[i], ge)] = i;

  const auto& e = volume.extents();
  const int s = static_cast<int>(cfg.embed.stride);
  std::vector<std::size_t> idx;
  idx.reserve(volume.voxel_count());
  for (std::size_t x = 0; x < e[0]; ++x)
    for (std::size_t y = 0; y < e[1]; ++y)
      for (std::size_t z = 0; z < e[2]; ++z) {
        const Coord c{std::min(static_cast<int>(x) / s, ge[0] - 1), std::min(static_cast<int>(y) / s, ge[1] - 1),
                      std::min(static_cast<int>(z) / s, ge[2] - 1)};
        idx.push_back(site_row[flat_index(c, ge)]);
      }
  r.prediction.logits = reshape(gather_rows(table, idx), {e[0], e[1], e[2], k});
  r.prediction.probabilities = softmax(r.prediction.logits);
  return r;
}

}  // namespace gcnv
