#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gcnv/tensor/tensor.hpp"

namespace gcnv {

// Seeded generator with a platform-independent uniform mapping; the standard
// distributions are implementation-defined and would break bit-exact replay.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  Tensor uniform_tensor(Shape shape, double lo, double hi) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gcnv
