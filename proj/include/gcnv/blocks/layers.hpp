#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gcnv/nonvoid/sparse_voxel_set.hpp"
#include "gcnv/tensor/random.hpp"
#include "gcnv/tensor/tensor.hpp"

namespace gcnv {

// Visits every trainable tensor under a dotted name. The callback may replace
// the tensor (e.g. with a tape leaf or an updated value).
using ParamFn = std::function<void(const std::string& name, Tensor& value)>;

// FLOPs per named layer (one multiply-accumulate = 2) plus attention pairs.
// LayerNorm, activations, softmax and additions are not counted.
struct CostCounter {
  std::map<std::string, double> flops;
  std::size_t attention_pairs = 0;

  void add(const std::string& layer, double count) { flops[layer] += count; }
  double total() const;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out], or empty for a bias-free layer

  static Linear init(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  bool has_bias() const { return !bias.empty(); }
  std::size_t in() const { return weight.dim(0); }
  std::size_t out() const { return weight.dim(1); }
  void for_each(const std::string& prefix, const ParamFn& fn);
};

Tensor apply(const Linear& layer, const Tensor& x, CostCounter* cost = nullptr, const std::string& name = {});

struct Norm {
  Tensor gamma;
  Tensor beta;

  static Norm init(std::size_t channels);
  void for_each(const std::string& prefix, const ParamFn& fn);
};

Tensor apply(const Norm& norm, const Tensor& x);

// Linear -> GELU -> Linear.
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp init(std::size_t channels, std::size_t hidden, Rng& rng);
  void for_each(const std::string& prefix, const ParamFn& fn);
};

Tensor apply(const Mlp& mlp, const Tensor& x, CostCounter* cost = nullptr, const std::string& name = {});

// Fixed sinusoidal 3D code. Axis a owns dims [a*C/3, (a+1)*C/3) as C/6
// interleaved (sin, cos) pairs with frequency 10000^(-6m/C), m = 0..C/6-1.
std::vector<double> positional_embedding(const Coord& c, std::size_t channels);
// One PE row per coordinate, [n, C].
Tensor positional_rows(std::span<const Coord> coords, std::size_t channels);

// The key projection has no bias: it would only shift every logit of a query
// by the same amount.
struct Attention {
  std::size_t heads = 1;
  Linear q, k, v, o;

  static Attention init(std::size_t channels, std::size_t heads, Rng& rng);
  std::size_t channels() const { return q.in(); }
  void for_each(const std::string& prefix, const ParamFn& fn);
};

// Scaled dot-product attention on already projected q[nq, C], k, v[nkv, C],
// split into `heads` column blocks and concatenated back. Counts nq*nkv pairs
// and 4*nq*nkv*C FLOPs.
Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                      CostCounter* cost = nullptr, const std::string& name = {});

// o(attention_core(q(Q), k(K), v(V))).
Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value, const Attention& attn,
                            CostCounter* cost = nullptr, const std::string& name = {});

struct BlockConfig {
  std::size_t channels = 12;
  std::size_t heads = 4;
  double mlp_ratio = 2.0;

  std::size_t hidden() const;
  void validate() const;
};

// Flattened parameter list in visiting order, and its inverse.
template <class Params>
std::vector<Tensor> collect_params(Params params) {
  std::vector<Tensor> out;
  params.for_each("", [&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

template <class Params>
Params assign_params(Params params, std::span<const Tensor> values, std::size_t offset = 0) {
  params.for_each("", [&](const std::string&, Tensor& t) { t = values[offset++]; });
  return params;
}

}  // namespace gcnv
