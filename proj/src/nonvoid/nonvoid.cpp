#include "gcnv/nonvoid/nonvoid.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gcnv/error.hpp"
#include "gcnv/tensor/ops.hpp"
#include "gcnv/tensor/random.hpp"

namespace gcnv {

void EmbedConfig::validate() const {
  if (kernel < 1 || stride < 1 || channels < 1) fail(ErrorKind::InvalidArgument, "embedding: kernel, stride and channels must be >= 1");
  if (!(epsilon > 0.0)) fail(ErrorKind::InvalidArgument, "embedding: epsilon must be > 0");
  if (!(temperature > 0.0)) fail(ErrorKind::InvalidArgument, "embedding: temperature must be > 0");
  if (!(lambda >= 0.0)) fail(ErrorKind::InvalidArgument, "embedding: lambda must be >= 0");
  if (norm_order != 1 && norm_order != 2) fail(ErrorKind::InvalidArgument, "embedding: norm order must be 1 or 2");
}

Tensor init_embedding_weights(const EmbedConfig& cfg, std::size_t modalities, std::uint64_t seed) {
  cfg.validate();
  const double fan_in = static_cast<double>(cfg.kernel * cfg.kernel * cfg.kernel * modalities);
  const double bound = 1.0 / std::sqrt(fan_in);
  Rng rng(seed);
  return rng.uniform_tensor({cfg.kernel, cfg.kernel, cfg.kernel, modalities, cfg.channels}, -bound, bound);
}

Tensor embed_volume(const DenseVolume& volume, std::span<const double> background, const Tensor& weights,
                    const EmbedConfig& cfg) {
  cfg.validate();
  const std::size_t m = volume.modalities();
  if (background.size() != m) {
    fail(ErrorKind::Shape, "embedding: background has " + std::to_string(background.size()) + " entries for " +
                               std::to_string(m) + " modalities");
  }
  const Shape expected{cfg.kernel, cfg.kernel, cfg.kernel, m, cfg.channels};
  if (weights.shape() != expected) {
    fail(ErrorKind::Shape, "embedding: weights " + shape_string(weights.shape()) + " vs expected " + shape_string(expected));
  }
  for (auto e : volume.extents()) {
    if (e < cfg.kernel) {
      fail(ErrorKind::Shape, "embedding: extent " + std::to_string(e) + " smaller than kernel " + std::to_string(cfg.kernel));
    }
  }
  const auto src = volume.intensities().values();
  std::vector<double> centered(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) centered[i] = src[i] - background[i % m];
  return conv3d(Tensor(volume.intensities().shape(), std::move(centered)), weights, cfg.stride, 0);
}

std::size_t OccupancyMap::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

GridExtents grid_of(const Tensor& features) {
  if (features.rank() != 4) fail(ErrorKind::Shape, "expected a [X, Y, Z, C] feature map, got " + shape_string(features.shape()));
  return {static_cast<int>(features.dim(0)), static_cast<int>(features.dim(1)), static_cast<int>(features.dim(2))};
}

Tensor rows_view(const Tensor& features) {
  return reshape(features, {features.dim(0) * features.dim(1) * features.dim(2), features.dim(3)});
}

}  // namespace

OccupancyMap compute_occupancy(const Tensor& features, const EmbedConfig& cfg) {
  cfg.validate();
  OccupancyMap occ;
  occ.extents = grid_of(features);
  const Tensor norms = lp_norm_rows(rows_view(features.detach()), cfg.norm_order);
  occ.bits.resize(norms.numel());
  for (std::size_t i = 0; i < norms.numel(); ++i) occ.bits[i] = norms[i] > cfg.epsilon ? 1 : 0;
  return occ;
}

OccupancyMap full_occupancy(GridExtents extents) {
  return OccupancyMap{extents, std::vector<std::uint8_t>(grid_volume(extents), 1)};
}

SparseVoxelSet voxelize(const Tensor& features, const OccupancyMap& occupancy) {
  const GridExtents ext = grid_of(features);
  if (ext != occupancy.extents || occupancy.bits.size() != grid_volume(ext)) {
    fail(ErrorKind::Shape, "voxelize: occupancy extents do not match feature map " + shape_string(features.shape()));
  }
  SparseVoxelSet set;
  set.extents = ext;
  std::vector<std::size_t> rows;
  for (int x = 0; x < ext[0]; ++x)
    for (int y = 0; y < ext[1]; ++y)
      for (int z = 0; z < ext[2]; ++z) {
        const Coord c{x, y, z};
        const std::size_t site = flat_index(c, ext);
        if (!occupancy.bits[site]) continue;
        set.ids.push_back(static_cast<VoxelId>(set.coords.size()));
        set.coords.push_back(c);
        rows.push_back(site);
      }
  set.features = rows.empty() ? Tensor::zeros({0, features.dim(3)}) : gather_rows(rows_view(features), rows);
  return set;
}

Tensor soft_nonvoid_ratio(const Tensor& features, const EmbedConfig& cfg) {
  cfg.validate();
  grid_of(features);
  const Tensor norms = lp_norm_rows(rows_view(features), cfg.norm_order);
  return mean(sigmoid(scale(add_scalar(norms, -cfg.epsilon), 1.0 / cfg.temperature)));
}

Tensor total_loss(const Tensor& seg_loss, const Tensor& nonvoid_ratio, double lambda) {
  if (seg_loss.numel() != 1 || nonvoid_ratio.numel() != 1) fail(ErrorKind::Shape, "total_loss: scalar inputs required");
  return add(reshape(seg_loss, {}), scale(reshape(nonvoid_ratio, {}), lambda));
}

double saving_from_counts(double nonvoid, double traditional) {
  if (!(traditional > 0.0)) fail(ErrorKind::InvalidArgument, "traditional voxel count must be positive");
  return 1.0 - nonvoid / traditional;
}

VoxelSavingRow voxel_saving_row(const std::string& name, const DenseVolume& volume, const Tensor& weights,
                                const EmbedConfig& cfg) {
  const auto b = derive_background_constant(volume);
  const Tensor features = embed_volume(volume, b, weights.detach(), cfg);
  const OccupancyMap occ = compute_occupancy(features, cfg);

  const auto& e = volume.extents();
  const std::size_t m = volume.modalities();
  const auto values = volume.intensities().values();
  std::size_t nonzero = 0;
  std::array<std::size_t, 3> lo{e[0], e[1], e[2]}, hi{0, 0, 0};
  for (std::size_t x = 0; x < e[0]; ++x)
    for (std::size_t y = 0; y < e[1]; ++y)
      for (std::size_t z = 0; z < e[2]; ++z) {
        const std::size_t i = (x * e[1] + y) * e[2] + z;
        bool fg = false;
        for (std::size_t c = 0; c < m && !fg; ++c) fg = values[i * m + c] != b[c];
        if (!fg) continue;
        ++nonzero;
        const std::size_t p[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          lo[a] = std::min(lo[a], p[a]);
          hi[a] = std::max(hi[a], p[a]);
        }
      }
  const double total = static_cast<double>(volume.voxel_count());
  VoxelSavingRow row;
  row.name = name;
  row.nonzero_ratio = static_cast<double>(nonzero) / total;
  row.cropped_ratio =
      nonzero == 0 ? 0.0 : static_cast<double>((hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1)) / total;
  row.nonvoid = static_cast<double>(occ.popcount());
  row.traditional = static_cast<double>(occ.bits.size());
  row.saving = saving_from_counts(row.nonvoid, row.traditional);
  return row;
}

VoxelSavingTable voxel_saving_stats(std::span<const NamedVolume> volumes, const EmbedConfig& cfg,
                                    std::uint64_t weight_seed) {
  if (volumes.empty()) fail(ErrorKind::InvalidArgument, "voxel saving statistics need at least one volume");
  std::map<std::size_t, Tensor> weights;
  VoxelSavingTable table;
  for (const auto& nv : volumes) {
    const std::size_t m = nv.volume.modalities();
    if (!weights.count(m)) weights.emplace(m, init_embedding_weights(cfg, m, weight_seed));
    table.rows.push_back(voxel_saving_row(nv.name, nv.volume, weights.at(m), cfg));
  }
  auto& agg = table.aggregate;
  agg.name = "aggregate";
  for (const auto& r : table.rows) {
    agg.nonzero_ratio += r.nonzero_ratio;
    agg.cropped_ratio += r.cropped_ratio;
    agg.nonvoid += r.nonvoid;
    agg.traditional += r.traditional;
  }
  const double n = static_cast<double>(table.rows.size());
  agg.nonzero_ratio /= n;
  agg.cropped_ratio /= n;
  agg.nonvoid /= n;
  agg.traditional /= n;
  agg.saving = saving_from_counts(agg.nonvoid, agg.traditional);
  return table;
}

std::string to_csv(const VoxelSavingTable& table) {
  std::ostringstream os;
  os << "Dataset,Non-zero Ratio (%),Cropped Ratio (%),Nonvoid Voxels (k),Traditional Voxels (k),Embedded Voxel Saving (%)\n";
  auto emit = [&](const VoxelSavingRow& r) {
    os << r.name << std::fixed << std::setprecision(2) << ',' << 100.0 * r.nonzero_ratio << ',' << 100.0 * r.cropped_ratio
       << ',' << std::setprecision(4) << r.nonvoid / 1000.0 << ',' << r.traditional / 1000.0 << ','
       << std::setprecision(2) << 100.0 * r.saving << '\n';
  };
  for (const auto& r : table.rows) emit(r);
  emit(table.aggregate);
  return os.str();
}

std::string to_json(const VoxelSavingTable& table) {
  auto row_json = [](const VoxelSavingRow& r) {
    nlohmann::ordered_json j;
    j["Dataset"] = r.name;
    j["Non-zero Ratio (%)"] = 100.0 * r.nonzero_ratio;
    j["Cropped Ratio (%)"] = 100.0 * r.cropped_ratio;
    j["Nonvoid Voxels (k)"] = r.nonvoid / 1000.0;
    j["Traditional Voxels (k)"] = r.traditional / 1000.0;
    j["Embedded Voxel Saving (%)"] = 100.0 * r.saving;
    return j;
  };
  nlohmann::ordered_json j;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) j["rows"].push_back(row_json(r));
  j["aggregate"] = row_json(table.aggregate);
  return j.dump(2) + "\n";
}

std::vector<EpsilonPoint> epsilon_sweep(const DenseVolume& volume, const Tensor& weights, const EmbedConfig& cfg,
                                        std::span<const double> epsilons) {
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) fail(ErrorKind::InvalidArgument, "epsilon sweep: thresholds must be > 0");
    if (i > 0 && !(epsilons[i] > epsilons[i - 1])) fail(ErrorKind::InvalidArgument, "epsilon sweep: grid must be strictly increasing");
  }
  const auto b = derive_background_constant(volume);
  const Tensor features = embed_volume(volume, b, weights.detach(), cfg);
  const Tensor norms = lp_norm_rows(rows_view(features), cfg.norm_order);
  std::vector<EpsilonPoint> out;
  for (double eps : epsilons) {
    std::size_t count = 0;
    for (double v : norms.values()) count += v > eps ? 1 : 0;
    out.push_back({eps, saving_from_counts(static_cast<double>(count), static_cast<double>(norms.numel())), count});
  }
  return out;
}

std::vector<double> default_epsilon_grid() {
  std::vector<double> grid;
  for (int e = -11; e <= 1; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

}  // namespace gcnv
