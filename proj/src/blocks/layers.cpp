#include "gcnv/blocks/layers.hpp"

#include <cmath>

#include "gcnv/error.hpp"
#include "gcnv/tensor/ops.hpp"

namespace gcnv {

double CostCounter::total() const {
  double t = 0.0;
  for (const auto& [name, f] : flops) t += f;
  return t;
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {rng.uniform_tensor({in, out}, -bound, bound), with_bias ? Tensor::zeros({out}) : Tensor::zeros({0})};
}

void Linear::for_each(const std::string& prefix, const ParamFn& fn) {
  fn(prefix + ".weight", weight);
  if (has_bias()) fn(prefix + ".bias", bias);
}

Tensor apply(const Linear& layer, const Tensor& x, CostCounter* cost, const std::string& name) {
  if (cost) cost->add(name, 2.0 * static_cast<double>(x.dim(0) * layer.in() * layer.out()));
  const Tensor y = matmul(x, layer.weight);
  return layer.has_bias() ? add_rowvec(y, layer.bias) : y;
}

Norm Norm::init(std::size_t channels) { return {Tensor::full({channels}, 1.0), Tensor::zeros({channels})}; }

void Norm::for_each(const std::string& prefix, const ParamFn& fn) {
  fn(prefix + ".gamma", gamma);
  fn(prefix + ".beta", beta);
}

Tensor apply(const Norm& norm, const Tensor& x) { return layer_norm(x, norm.gamma, norm.beta); }

Mlp Mlp::init(std::size_t channels, std::size_t hidden, Rng& rng) {
  Mlp m;
  m.fc1 = Linear::init(channels, hidden, rng);
  m.fc2 = Linear::init(hidden, channels, rng);
  return m;
}

void Mlp::for_each(const std::string& prefix, const ParamFn& fn) {
  fc1.for_each(prefix + ".fc1", fn);
  fc2.for_each(prefix + ".fc2", fn);
}

Tensor apply(const Mlp& mlp, const Tensor& x, CostCounter* cost, const std::string& name) {
  return apply(mlp.fc2, gelu(apply(mlp.fc1, x, cost, name)), cost, name);
}

std::vector<double> positional_embedding(const Coord& c, std::size_t channels) {
  if (channels == 0 || channels % 6 != 0) {
    fail(ErrorKind::InvalidArgument, "positional embedding needs channels divisible by 6, got " + std::to_string(channels));
  }
  const std::size_t per_axis = channels / 3;
  std::vector<double> out(channels);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t m = 0; m < channels / 6; ++m) {
      const double freq = std::pow(10000.0, -6.0 * static_cast<double>(m) / static_cast<double>(channels));
      const double angle = static_cast<double>(c[a]) * freq;
      out[a * per_axis + 2 * m] = std::sin(angle);
      out[a * per_axis + 2 * m + 1] = std::cos(angle);
    }
  return out;
}

Tensor positional_rows(std::span<const Coord> coords, std::size_t channels) {
  std::vector<double> v;
  v.reserve(coords.size() * channels);
  for (const auto& c : coords) {
    auto row = positional_embedding(c, channels);
    v.insert(v.end(), row.begin(), row.end());
  }
  if (coords.empty()) positional_embedding({0, 0, 0}, channels);  // still validate C
  return Tensor({coords.size(), channels}, std::move(v));
}

Attention Attention::init(std::size_t channels, std::size_t heads, Rng& rng) {
  if (heads == 0 || channels % heads != 0) {
    fail(ErrorKind::InvalidArgument,
         "attention heads (" + std::to_string(heads) + ") must divide channels (" + std::to_string(channels) + ")");
  }
  Attention a;
  a.heads = heads;
  a.q = Linear::init(channels, channels, rng);
  a.k = Linear::init(channels, channels, rng, false);
  a.v = Linear::init(channels, channels, rng);
  a.o = Linear::init(channels, channels, rng);
  return a;
}

void Attention::for_each(const std::string& prefix, const ParamFn& fn) {
  q.for_each(prefix + ".q", fn);
  k.for_each(prefix + ".k", fn);
  v.for_each(prefix + ".v", fn);
  o.for_each(prefix + ".o", fn);
}

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, CostCounter* cost,
                      const std::string& name) {
  if (q.rank() != 2 || k.rank() != 2 || v.shape() != k.shape() || q.dim(1) != k.dim(1)) {
    fail(ErrorKind::Shape, "attention: q " + shape_string(q.shape()) + ", k " + shape_string(k.shape()) + ", v " +
                               shape_string(v.shape()));
  }
  require(k.dim(0) >= 1, ErrorKind::InvalidArgument, "attention needs at least one key");
  const std::size_t c = q.dim(1);
  require(heads >= 1 && c % heads == 0, ErrorKind::InvalidArgument, "attention heads must divide channels");
  const std::size_t dh = c / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  if (cost) {
    cost->attention_pairs += q.dim(0) * k.dim(0);
    cost->add(name, 4.0 * static_cast<double>(q.dim(0) * k.dim(0) * c));
  }
  std::vector<Tensor> parts;
  parts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    const Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    parts.push_back(matmul(softmax(scale(matmul(qh, transpose(kh)), inv)), vh));
  }
  return heads == 1 ? parts[0] : concat_cols(parts);
}

Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value, const Attention& attn,
                            CostCounter* cost, const std::string& name) {
  const std::size_t c = attn.channels();
  if (query.rank() != 2 || query.dim(1) != c || key.rank() != 2 || key.dim(1) != c || value.shape() != key.shape()) {
    fail(ErrorKind::Shape, "attention over " + std::to_string(c) + " channels: Q " + shape_string(query.shape()) +
                               ", K " + shape_string(key.shape()) + ", V " + shape_string(value.shape()));
  }
  const Tensor q = apply(attn.q, query, cost, name);
  const Tensor k = apply(attn.k, key, cost, name);
  const Tensor v = apply(attn.v, value, cost, name);
  return apply(attn.o, attention_core(q, k, v, attn.heads, cost, name), cost, name);
}

std::size_t BlockConfig::hidden() const {
  return static_cast<std::size_t>(std::lround(static_cast<double>(channels) * mlp_ratio));
}

void BlockConfig::validate() const {
  if (channels == 0 || channels % 6 != 0) {
    fail(ErrorKind::InvalidArgument, "channels must be a positive multiple of 6, got " + std::to_string(channels));
  }
  if (heads == 0 || channels % heads != 0) {
    fail(ErrorKind::InvalidArgument,
         "heads (" + std::to_string(heads) + ") must divide channels (" + std::to_string(channels) + ")");
  }
  require(hidden() >= 1, ErrorKind::InvalidArgument, "mlp ratio gives an empty hidden layer");
}

}  // namespace gcnv
