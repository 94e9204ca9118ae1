#include "gcnv/volume/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>

#include <json.hpp>

#include "gcnv/error.hpp"

namespace gcnv {

std::string_view to_string(NormalizationScheme scheme) {
  switch (scheme) {
    case NormalizationScheme::CT: return "CT";
    case NormalizationScheme::MriMasked: return "MRI_MASKED";
    case NormalizationScheme::MriUnmasked: return "MRI_UNMASKED";
  }
  return "";
}

NormalizationScheme parse_scheme(std::string_view tag) {
  if (tag == "CT") return NormalizationScheme::CT;
  if (tag == "MRI_MASKED") return NormalizationScheme::MriMasked;
  if (tag == "MRI_UNMASKED") return NormalizationScheme::MriUnmasked;
  fail(ErrorKind::Format, "unknown normalization scheme '" + std::string(tag) + "'");
}

DenseVolume::DenseVolume(Tensor intensities, NormalizationRecord meta)
    : intensities_(std::move(intensities)), meta_(std::move(meta)) {
  if (intensities_.rank() != 4) {
    fail(ErrorKind::Shape, "volume intensities must be [H, W, D, M], got " + shape_string(intensities_.shape()));
  }
  for (std::size_t a = 0; a < 3; ++a) extents_[a] = intensities_.dim(a);
  modalities_ = intensities_.dim(3);
  if (extents_[0] < 1 || extents_[1] < 1 || extents_[2] < 1 || modalities_ < 1) {
    fail(ErrorKind::Shape, "volume extents and modalities must be >= 1, got " + shape_string(intensities_.shape()));
  }
  if (!intensities_.all_finite()) fail(ErrorKind::NonFinite, "volume intensities must be finite");
  intensities_ = intensities_.detach();
}

double histogram_mode(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::InvalidArgument, "histogram_mode: no values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) return lo;
  auto bin_of = [&](double v) {
    const auto b = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(kHistogramBins)));
    return std::min(b, kHistogramBins - 1);
  };
  std::vector<std::size_t> counts(kHistogramBins, 0);
  for (double v : values) ++counts[bin_of(v)];
  const std::size_t mode_bin =
      static_cast<std::size_t>(std::distance(counts.begin(), std::max_element(counts.begin(), counts.end())));

  std::vector<double> members;
  members.reserve(counts[mode_bin]);
  for (double v : values)
    if (bin_of(v) == mode_bin) members.push_back(v);
  std::sort(members.begin(), members.end());
  double best = members.front();
  std::size_t best_run = 0;
  for (std::size_t i = 0; i < members.size();) {
    std::size_t j = i;
    while (j < members.size() && members[j] == members[i]) ++j;
    if (j - i > best_run) {
      best_run = j - i;
      best = members[i];
    }
    i = j;
  }
  return best;
}

std::vector<double> derive_background_constant(const DenseVolume& volume) {
  const std::size_t m = volume.modalities();
  const auto& meta = volume.meta();
  switch (meta.scheme) {
    case NormalizationScheme::CT: {
      if (!meta.mean || !meta.stddev || !meta.p0_5) {
        fail(ErrorKind::InvalidArgument, "CT normalization needs mean, std and p0.5 statistics");
      }
      if (meta.mean->size() != m || meta.stddev->size() != m || meta.p0_5->size() != m) {
        fail(ErrorKind::InvalidArgument, "CT statistics must have one entry per channel");
      }
      std::vector<double> b(m);
      for (std::size_t c = 0; c < m; ++c) {
        if ((*meta.stddev)[c] <= 0.0) fail(ErrorKind::InvalidArgument, "CT standard deviation must be positive");
        b[c] = ((*meta.p0_5)[c] - (*meta.mean)[c]) / (*meta.stddev)[c];
      }
      return b;
    }
    case NormalizationScheme::MriMasked:
      return std::vector<double>(m, 0.0);
    case NormalizationScheme::MriUnmasked: {
      std::vector<double> b(m);
      std::vector<double> channel(volume.voxel_count());
      const auto values = volume.intensities().values();
      for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < channel.size(); ++i) channel[i] = values[i * m + c];
        b[c] = histogram_mode(channel);
      }
      return b;
    }
  }
  return {};
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string stem(const std::string& path) {
  if (ends_with(path, ".raw") || ends_with(path, ".json")) return path.substr(0, path.rfind('.'));
  return path;
}

std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "short write to '" + path + "'");
}

nlohmann::json stats_json(const NormalizationRecord& meta) {
  nlohmann::json stats = nlohmann::json::object();
  if (meta.mean) stats["mean"] = *meta.mean;
  if (meta.stddev) stats["std"] = *meta.stddev;
  if (meta.p0_5) stats["p0_5"] = *meta.p0_5;
  return stats;
}

}  // namespace

std::string raw_path_for(const std::string& path) { return stem(path) + ".raw"; }
std::string sidecar_path_for(const std::string& path) { return stem(path) + ".json"; }

void write_volume(const DenseVolume& volume, const std::string& path) {
  nlohmann::ordered_json header;
  const auto& e = volume.extents();
  header["extents"] = {e[0], e[1], e[2]};
  header["modalities"] = volume.modalities();
  header["scheme"] = std::string(to_string(volume.meta().scheme));
  header["stats"] = stats_json(volume.meta());

  std::string payload;
  payload.reserve(volume.intensities().numel() * 4);
  for (double v : volume.intensities().values()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int k = 0; k < 4; ++k) payload.push_back(static_cast<char>((bits >> (8 * k)) & 0xFFu));
  }
  write_bytes(raw_path_for(path), payload);
  write_bytes(sidecar_path_for(path), header.dump(2) + "\n");
}

DenseVolume read_volume(const std::string& path) {
  const auto header_bytes = read_bytes(sidecar_path_for(path));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, "malformed volume header '" + sidecar_path_for(path) + "': " + e.what());
  }
  Extents ext{};
  std::size_t m = 0;
  NormalizationRecord meta;
  try {
    const auto& jext = header.at("extents");
    if (!jext.is_array() || jext.size() != 3) fail(ErrorKind::Format, "volume header: extents must have 3 entries");
    for (std::size_t a = 0; a < 3; ++a) ext[a] = jext[a].get<std::size_t>();
    m = header.at("modalities").get<std::size_t>();
    meta.scheme = parse_scheme(header.at("scheme").get<std::string>());
    if (header.contains("stats")) {
      const auto& s = header["stats"];
      if (s.contains("mean")) meta.mean = s["mean"].get<std::vector<double>>();
      if (s.contains("std")) meta.stddev = s["std"].get<std::vector<double>>();
      if (s.contains("p0_5")) meta.p0_5 = s["p0_5"].get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("volume header: ") + e.what());
  }

  const auto payload = read_bytes(raw_path_for(path));
  const std::size_t declared = ext[0] * ext[1] * ext[2] * m;
  if (payload.size() != declared * 4) {
    fail(ErrorKind::Format, "size mismatch: header declares " + std::to_string(declared) + " values, payload has " +
                                std::to_string(payload.size() / 4) +
                                (payload.size() % 4 ? " (plus trailing bytes)" : ""));
  }
  std::vector<double> values(declared);
  for (std::size_t i = 0; i < declared; ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[i * 4 + k])) << (8 * k);
    values[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return DenseVolume(Tensor({ext[0], ext[1], ext[2], m}, std::move(values)), std::move(meta));
}

}  // namespace gcnv
