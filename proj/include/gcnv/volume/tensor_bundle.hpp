#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gcnv/tensor/tensor.hpp"

namespace gcnv {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Named tensors in one raw payload (little-endian float64) with a JSON sidecar
// {"dtype":"float64","tensors":[{"name","shape","offset"}]}; offsets count values.
void write_tensor_bundle(const NamedTensors& tensors, const std::string& path);
NamedTensors read_tensor_bundle(const std::string& path);

}  // namespace gcnv
