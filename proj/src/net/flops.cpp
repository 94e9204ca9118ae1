#include "gcnv/net/flops.hpp"

#include <map>
#include <set>

#include <json.hpp>

#include "gcnv/error.hpp"

namespace gcnv {

std::size_t tri_pairs_closed_form(const std::vector<std::size_t>& window_sizes, std::size_t capacity) {
  require(capacity >= 1, ErrorKind::InvalidArgument, "subset capacity must be >= 1");
  std::size_t per_direction = 0;
  for (auto phi : window_sizes) {
    const std::size_t rest = phi % capacity;
    per_direction += (phi / capacity) * capacity * capacity + rest * rest;
  }
  return 3 * per_direction;
}

namespace {

std::vector<std::size_t> window_sizes(const std::vector<Coord>& coords, int t) {
  std::map<Coord, std::size_t> cells;
  for (const auto& c : coords) ++cells[{c[0] / t, c[1] / t, c[2] / t}];
  std::vector<std::size_t> out;
  for (const auto& [k, n] : cells) out.push_back(n);
  return out;
}

}  // namespace

StructureStats structure_stats(const DenseVolume& volume, const ModelConfig& cfg, const Tensor& embed_weights,
                               bool dense_forced) {
  cfg.validate();
  cfg.check_extents(volume.extents());
  const auto b = derive_background_constant(volume);
  const Tensor f = embed_volume(volume, b, embed_weights.detach(), cfg.embed);
  const GridExtents ge{static_cast<int>(f.dim(0)), static_cast<int>(f.dim(1)), static_cast<int>(f.dim(2))};
  const OccupancyMap occ = dense_forced ? full_occupancy(ge) : compute_occupancy(f, cfg.embed);

  StructureStats st;
  st.embedded_sites = grid_volume(ge);
  st.modalities = volume.modalities();
  std::vector<Coord> coords;
  for (int x = 0; x < ge[0]; ++x)
    for (int y = 0; y < ge[1]; ++y)
      for (int z = 0; z < ge[2]; ++z)
        if (occ.at({x, y, z})) coords.push_back({x, y, z});

  for (std::size_t l = 0; l <= cfg.stages; ++l) {
    const auto t = cfg.level_tdnvt(l);
    st.levels.push_back({coords.size(), tri_pairs_closed_form(window_sizes(coords, t.window), t.capacity)});
    std::set<Coord> next;
    for (const auto& c : coords) next.insert({c[0] / cfg.pool, c[1] / cfg.pool, c[2] / cfg.pool});
    coords.assign(next.begin(), next.end());
  }
  return st;
}

FlopReport count_flops(const ModelConfig& cfg, const StructureStats& st) {
  cfg.validate();
  require(st.levels.size() == cfg.stages + 1, ErrorKind::InvalidArgument, "structure stats need one entry per level");
  FlopReport r;
  auto add = [&](const std::string& name, double f) {
    if (f > 0.0) r.layers[name] += f;
  };
  auto d = [](std::size_t v) { return static_cast<double>(v); };

  auto tdnvt = [&](const std::string& name, std::size_t level) {
    const double n = d(st.levels[level].voxels), c = d(cfg.level_channels(level));
    const double h = d(cfg.level_block(level).hidden());
    const double pairs = d(st.levels[level].tri_pairs) / 3.0;
    for (auto dir : kDirections) add(name + "." + std::string(to_string(dir)), 8.0 * n * c * c + 4.0 * pairs * c + 4.0 * n * c * h);
  };

  const double k3 = d(cfg.embed.kernel * cfg.embed.kernel * cfg.embed.kernel);
  add("embed", 2.0 * d(st.embedded_sites) * k3 * d(st.modalities) * d(cfg.channels[0]));

  for (std::size_t i = 0; i < cfg.stages; ++i) {
    const std::string n = std::to_string(i);
    const double fine = d(st.levels[i].voxels), coarse = d(st.levels[i + 1].voxels);
    const double c = d(cfg.level_channels(i)), h = d(cfg.level_block(i).hidden()), next = d(cfg.level_channels(i + 1));
    tdnvt("encoder." + n, i);
    add("down." + n, 4.0 * fine * c * h + 4.0 * fine * c * c + 4.0 * coarse * c * c + 4.0 * fine * c);
    if (c != next) add("down_proj." + n, 2.0 * coarse * c * next);
    const std::string en = "extract." + std::to_string(i + 1);
    if (i + 1 <= cfg.conv_levels) {
      add(en, 2.0 * 2.0 * 27.0 * coarse * next * next);
    } else {
      tdnvt(en, i + 1);
    }
  }
  for (std::size_t l = 0; l < cfg.stages; ++l) {
    const std::string n = std::to_string(l);
    const double fine = d(st.levels[l].voxels), coarse = d(st.levels[l + 1].voxels);
    if (fine == 0.0) continue;
    const double c = d(cfg.level_channels(l)), h = d(cfg.level_block(l).hidden()), up = d(cfg.level_channels(l + 1));
    if (c != up) add("up_proj." + n, 2.0 * coarse * up * c);
    add("up." + n, 8.0 * fine * c * h + 4.0 * fine * c * c + 4.0 * coarse * c * c + 4.0 * fine * c);
  }
  add("head", 2.0 * d(st.levels[0].voxels) * d(cfg.channels[0]) * d(cfg.classes));
  for (const auto& [name, f] : r.layers) r.total += f;
  return r;
}

std::string FlopReport::to_json() const {
  nlohmann::ordered_json j;
  j["layers"] = nlohmann::ordered_json::object();
  for (const auto& [name, f] : layers) j["layers"][name] = f;
  j["total"] = total;
  return j.dump(2) + "\n";
}

}  // namespace gcnv
