#include "gcnv/volume/tensor_bundle.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "gcnv/error.hpp"
#include "gcnv/volume/volume.hpp"

namespace gcnv {

void write_tensor_bundle(const NamedTensors& tensors, const std::string& path) {
  nlohmann::ordered_json header;
  header["dtype"] = "float64";
  header["tensors"] = nlohmann::ordered_json::array();
  std::string payload;
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
    for (double v : t.values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int k = 0; k < 8; ++k) payload.push_back(static_cast<char>((bits >> (8 * k)) & 0xFFu));
    }
  }
  std::ofstream raw(raw_path_for(path), std::ios::binary | std::ios::trunc);
  std::ofstream side(sidecar_path_for(path), std::ios::trunc);
  if (!raw || !side) fail(ErrorKind::Io, "cannot write tensor bundle '" + path + "'");
  raw.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  side << header.dump(2) << "\n";
}

NamedTensors read_tensor_bundle(const std::string& path) {
  std::ifstream side(sidecar_path_for(path));
  std::ifstream raw(raw_path_for(path), std::ios::binary);
  if (!side || !raw) fail(ErrorKind::Io, "cannot open tensor bundle '" + path + "'");
  const std::vector<char> payload{std::istreambuf_iterator<char>(raw), std::istreambuf_iterator<char>()};
  NamedTensors out;
  try {
    const auto header = nlohmann::json::parse(side);
    if (header.at("dtype").get<std::string>() != "float64") fail(ErrorKind::Format, "tensor bundle: unsupported dtype");
    std::size_t expected = 0;
    for (const auto& entry : header.at("tensors")) {
      Shape shape = entry.at("shape").get<Shape>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t n = shape_numel(shape);
      if ((offset + n) * 8 > payload.size()) fail(ErrorKind::Format, "tensor bundle: payload too short");
      std::vector<double> values(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k)
          bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(payload[(offset + i) * 8 + k])) << (8 * k);
        values[i] = std::bit_cast<double>(bits);
      }
      expected = std::max(expected, offset + n);
      out.emplace_back(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
    }
    if (expected * 8 != payload.size()) fail(ErrorKind::Format, "tensor bundle: payload size does not match header");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("tensor bundle header: ") + e.what());
  }
  return out;
}

}  // namespace gcnv
