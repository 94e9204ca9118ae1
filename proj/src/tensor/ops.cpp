#include "gcnv/tensor/ops.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <cmath>
#include <numbers>
#include <string>

#include "gcnv/error.hpp"
#include "gcnv/tensor/tape.hpp"

namespace gcnv {
namespace {

void check_finite(const Tensor& t, std::string_view op) {
  if (!t.all_finite()) fail(ErrorKind::NonFinite, std::string(op) + ": non-finite input");
}

void check_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::Shape, std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                               shape_string(b.shape()));
  }
}

void check_rank(const Tensor& t, std::size_t rank, std::string_view op) {
  if (t.rank() != rank) {
    fail(ErrorKind::Shape, std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                               shape_string(t.shape()));
  }
}

Tensor finish(Tensor value, std::string_view kind, std::initializer_list<Tensor> inputs, BackwardFn fn) {
  Tape* tape = nullptr;
  for (const auto& in : inputs) {
    if (!in.tracked()) continue;
    if (tape != nullptr && tape != in.tape()) fail(ErrorKind::InvalidArgument, std::string(kind) + ": inputs on different tapes");
    tape = in.tape();
  }
  if (tape == nullptr) return value;
  return tape->record(std::move(value), kind, std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(fn));
}

Tensor finish_many(Tensor value, std::string_view kind, std::span<const Tensor> inputs, BackwardFn fn) {
  Tape* tape = nullptr;
  for (const auto& in : inputs) {
    if (!in.tracked()) continue;
    if (tape != nullptr && tape != in.tape()) fail(ErrorKind::InvalidArgument, std::string(kind) + ": inputs on different tapes");
    tape = in.tape();
  }
  if (tape == nullptr) return value;
  return tape->record(std::move(value), kind, inputs, std::move(fn));
}

// Elementwise unary map with derivative expressed through (x, y).
template <typename F, typename D>
Tensor unary(const Tensor& x, std::string_view kind, F f, D dfdx) {
  check_finite(x, kind);
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  Tensor y(x.shape(), std::move(out));
  return finish(y, kind, {x}, [x, y, dfdx](std::span<const double> g, std::span<std::vector<double>*> gi) {
    auto xv = x.values();
    auto yv = y.values();
    auto& gx = *gi[0];
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

std::size_t last_dim(const Tensor& x) { return x.rank() == 0 ? 1 : x.shape().back(); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  check_finite(a, "add");
  check_finite(b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return finish(Tensor(a.shape(), std::move(out)), "add", {a, b}, [](auto g, auto gi) {
    for (auto* buf : gi)
      if (buf)
        for (std::size_t i = 0; i < g.size(); ++i) (*buf)[i] += g[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  check_finite(a, "sub");
  check_finite(b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return finish(Tensor(a.shape(), std::move(out)), "sub", {a, b}, [](auto g, auto gi) {
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  check_finite(a, "mul");
  check_finite(b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return finish(Tensor(a.shape(), std::move(out)), "mul", {a, b}, [a, b](auto g, auto gi) {
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * b[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * a[i];
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  check_finite(a, "div");
  check_finite(b, "div");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (b[i] == 0.0) fail(ErrorKind::NonFinite, "div: division by zero");
    out[i] = a[i] / b[i];
  }
  return finish(Tensor(a.shape(), std::move(out)), "div", {a, b}, [a, b](auto g, auto gi) {
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] / b[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i] * a[i] / (b[i] * b[i]);
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(x, "add_scalar", [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  check_rank(x, 2, "add_rowvec");
  check_rank(v, 1, "add_rowvec");
  if (v.dim(0) != x.dim(1)) {
    fail(ErrorKind::Shape, "add_rowvec: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(v.shape()));
  }
  check_finite(x, "add_rowvec");
  check_finite(v, "add_rowvec");
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x[i * c + j] + v[j];
  return finish(Tensor(x.shape(), std::move(out)), "add_rowvec", {x, v}, [n, c](auto g, auto gi) {
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
    if (gi[1])
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gi[1])[j] += g[i * c + j];
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return unary(
      x, "gelu", [](double v) { return 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(kC * (v + kA * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
      });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values())
    if (v <= 0.0) fail(ErrorKind::NonFinite, "log: non-positive input");
  return unary(x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank(a, 2, "matmul");
  check_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    fail(ErrorKind::Shape, "matmul: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  check_finite(a, "matmul");
  check_finite(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return finish(Tensor({m, n}, std::move(out)), "matmul", {a, b}, [a, b, m, k, n](auto g, auto gi) {
    auto av = a.values();
    auto bv = b.values();
    if (gi[0]) {
      auto& ga = *gi[0];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (gi[1]) {
      auto& gb = *gi[1];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double s = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += s * g[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  check_rank(a, 2, "transpose");
  check_finite(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return finish(Tensor({n, m}, std::move(out)), "transpose", {a}, [m, n](auto g, auto gi) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*gi[0])[i * n + j] += g[j * m + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  check_finite(x, "reshape");
  Tensor y = x.with_shape(std::move(shape));
  return finish(y, "reshape", {x}, [](auto g, auto gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  });
}

Tensor sum(const Tensor& x) {
  check_finite(x, "sum");
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return finish(Tensor::scalar(acc), "sum", {x}, [](auto g, auto gi) {
    for (auto& v : *gi[0]) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) fail(ErrorKind::Shape, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_rows(const Tensor& x) {
  check_rank(x, 2, "sum_rows");
  check_finite(x, "sum_rows");
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += x[i * c + j];
  return finish(Tensor({c}, std::move(out)), "sum_rows", {x}, [n, c](auto g, auto gi) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) (*gi[0])[i * c + j] += g[j];
  });
}

Tensor max_rows(const Tensor& x) {
  check_rank(x, 2, "max_rows");
  check_finite(x, "max_rows");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (n == 0) fail(ErrorKind::Shape, "max_rows: no rows");
  std::vector<double> out(c);
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    out[j] = x[j];
    for (std::size_t i = 1; i < n; ++i) {
      if (x[i * c + j] > out[j]) {
        out[j] = x[i * c + j];
        arg[j] = i;
      }
    }
  }
  return finish(Tensor({c}, std::move(out)), "max_rows", {x}, [arg, c](auto g, auto gi) {
    for (std::size_t j = 0; j < c; ++j) (*gi[0])[arg[j] * c + j] += g[j];
  });
}

Tensor softmax(const Tensor& x) {
  check_finite(x, "softmax");
  const std::size_t c = last_dim(x);
  const std::size_t rows = c == 0 ? 0 : x.numel() / c;
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * c;
    double* o = out.data() + r * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= z;
  }
  Tensor y(x.shape(), std::move(out));
  return finish(y, "softmax", {x}, [y, rows, c](auto g, auto gi) {
    auto yv = y.values();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * yv[r * c + j];
      for (std::size_t j = 0; j < c; ++j) (*gi[0])[r * c + j] += yv[r * c + j] * (g[r * c + j] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  check_finite(x, "log_softmax");
  const std::size_t c = last_dim(x);
  const std::size_t rows = c == 0 ? 0 : x.numel() / c;
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.values().data() + r * c;
    double* o = out.data() + r * c;
    const double mx = *std::max_element(in, in + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) o[j] = in[j] - lz;
  }
  Tensor y(x.shape(), std::move(out));
  return finish(y, "log_softmax", {x}, [y, rows, c](auto g, auto gi) {
    auto yv = y.values();
    for (std::size_t r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g[r * c + j];
      for (std::size_t j = 0; j < c; ++j) (*gi[0])[r * c + j] += g[r * c + j] - std::exp(yv[r * c + j]) * gs;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_rank(x, 2, "layer_norm");
  check_rank(gamma, 1, "layer_norm");
  check_rank(beta, 1, "layer_norm");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (gamma.dim(0) != c || beta.dim(0) != c) {
    fail(ErrorKind::Shape, "layer_norm: shape mismatch " + shape_string(x.shape()) + " vs " +
                               shape_string(gamma.shape()));
  }
  check_finite(x, "layer_norm");
  check_finite(gamma, "layer_norm");
  check_finite(beta, "layer_norm");
  std::vector<double> xhat(x.numel()), rstd(n), out(x.numel());
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += x[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x[i * c + j] - mu) * (x[i * c + j] - mu);
    var /= static_cast<double>(c);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (x[i * c + j] - mu) * rstd[i];
      out[i * c + j] = xhat[i * c + j] * gamma[j] + beta[j];
    }
  }
  return finish(Tensor(x.shape(), std::move(out)), "layer_norm", {x, gamma, beta},
                [xhat = std::move(xhat), rstd = std::move(rstd), gamma, n, c](auto g, auto gi) {
                  const double inv_c = 1.0 / static_cast<double>(c);
                  for (std::size_t i = 0; i < n; ++i) {
                    if (gi[1] || gi[2]) {
                      for (std::size_t j = 0; j < c; ++j) {
                        if (gi[1]) (*gi[1])[j] += g[i * c + j] * xhat[i * c + j];
                        if (gi[2]) (*gi[2])[j] += g[i * c + j];
                      }
                    }
                    if (!gi[0]) continue;
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                      const double d = g[i * c + j] * gamma[j];
                      m1 += d;
                      m2 += d * xhat[i * c + j];
                    }
                    m1 *= inv_c;
                    m2 *= inv_c;
                    for (std::size_t j = 0; j < c; ++j) {
                      const double d = g[i * c + j] * gamma[j];
                      (*gi[0])[i * c + j] += rstd[i] * (d - m1 - xhat[i * c + j] * m2);
                    }
                  }
                });
}

Tensor lp_norm_rows(const Tensor& x, int p) {
  check_rank(x, 2, "lp_norm_rows");
  if (p < 1) fail(ErrorKind::InvalidArgument, "lp_norm_rows: p must be >= 1");
  check_finite(x, "lp_norm_rows");
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double a = std::abs(x[i * c + j]);
      acc += p == 1 ? a : (p == 2 ? a * a : std::pow(a, p));
    }
    out[i] = p == 1 ? acc : (p == 2 ? std::sqrt(acc) : std::pow(acc, 1.0 / p));
  }
  Tensor y({n}, std::move(out));
  return finish(y, "lp_norm_rows", {x}, [x, y, n, c, p](auto g, auto gi) {
    for (std::size_t i = 0; i < n; ++i) {
      const double norm = y[i];
      if (norm == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) {
        const double v = x[i * c + j];
        const double sgn = (v > 0) - (v < 0);
        double d;
        if (p == 1) d = sgn;
        else if (p == 2) d = v / norm;
        else d = sgn * std::pow(std::abs(v) / norm, p - 1);
        (*gi[0])[i * c + j] += g[i] * d;
      }
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  check_rank(x, 2, "gather_rows");
  check_finite(x, "gather_rows");
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<double> out(rows.size() * c);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) fail(ErrorKind::Shape, "gather_rows: row index " + std::to_string(rows[r]) + " out of range " + std::to_string(n));
    std::copy_n(x.values().data() + rows[r] * c, c, out.data() + r * c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return finish(Tensor({rows.size(), c}, std::move(out)), "gather_rows", {x}, [idx = std::move(idx), c](auto g, auto gi) {
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) (*gi[0])[idx[r] * c + j] += g[r * c + j];
  });
}

Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> rows, std::size_t n) {
  check_rank(x, 2, "scatter_rows");
  check_finite(x, "scatter_rows");
  if (rows.size() != x.dim(0)) {
    fail(ErrorKind::Shape, "scatter_rows: " + std::to_string(rows.size()) + " indices for shape " + shape_string(x.shape()));
  }
  const std::size_t c = x.dim(1);
  std::vector<double> out(n * c, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) fail(ErrorKind::Shape, "scatter_rows: row index " + std::to_string(rows[r]) + " out of range " + std::to_string(n));
    for (std::size_t j = 0; j < c; ++j) out[rows[r] * c + j] += x[r * c + j];
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return finish(Tensor({n, c}, std::move(out)), "scatter_rows", {x}, [idx = std::move(idx), c](auto g, auto gi) {
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < c; ++j) (*gi[0])[r * c + j] += g[idx[r] * c + j];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorKind::Shape, "concat_rows: no inputs");
  const std::size_t c = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    check_rank(p, 2, "concat_rows");
    if (p.dim(1) != c) {
      fail(ErrorKind::Shape, "concat_rows: shape mismatch " + shape_string(parts[0].shape()) + " vs " + shape_string(p.shape()));
    }
    check_finite(p, "concat_rows");
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * c);
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  return finish_many(Tensor({rows, c}, std::move(out)), "concat_rows", parts, [offsets](auto g, auto gi) {
    for (std::size_t k = 0; k < gi.size(); ++k) {
      if (!gi[k]) continue;
      auto& buf = *gi[k];
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[offsets[k] + i];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  check_rank(x, 2, "slice_cols");
  check_finite(x, "slice_cols");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (begin > end || end > c) fail(ErrorKind::Shape, "slice_cols: range out of bounds for " + shape_string(x.shape()));
  const std::size_t w = end - begin;
  std::vector<double> out(n * w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = x[i * c + begin + j];
  return finish(Tensor({n, w}, std::move(out)), "slice_cols", {x}, [n, c, w, begin](auto g, auto gi) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) (*gi[0])[i * c + begin + j] += g[i * w + j];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorKind::Shape, "concat_cols: no inputs");
  const std::size_t n = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t c = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    check_rank(p, 2, "concat_cols");
    if (p.dim(0) != n) {
      fail(ErrorKind::Shape, "concat_cols: shape mismatch " + shape_string(parts[0].shape()) + " vs " + shape_string(p.shape()));
    }
    check_finite(p, "concat_cols");
    widths.push_back(p.dim(1));
    c += p.dim(1);
  }
  std::vector<double> out(n * c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * c + off + j] = p[i * w + j];
    off += w;
  }
  return finish_many(Tensor({n, c}, std::move(out)), "concat_cols", parts, [widths, n, c](auto g, auto gi) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < gi.size(); ++k) {
      const std::size_t w = widths[k];
      if (gi[k])
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) (*gi[k])[i * w + j] += g[i * c + off + j];
      off += w;
    }
  });
}

Tensor conv3d(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t padding) {
  check_rank(x, 4, "conv3d");
  check_rank(weight, 5, "conv3d");
  const std::size_t k = weight.dim(0);
  const std::size_t cin = x.dim(3), cout = weight.dim(4);
  if (weight.dim(1) != k || weight.dim(2) != k || weight.dim(3) != cin) {
    fail(ErrorKind::Shape, "conv3d: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(weight.shape()));
  }
  if (stride < 1 || k < 1) fail(ErrorKind::InvalidArgument, "conv3d: kernel and stride must be >= 1");
  std::array<std::size_t, 3> in{x.dim(0), x.dim(1), x.dim(2)}, out_ext{};
  for (int a = 0; a < 3; ++a) {
    if (in[a] + 2 * padding < k) {
      fail(ErrorKind::Shape, "conv3d: input extents " + shape_string(x.shape()) + " smaller than kernel " + std::to_string(k));
    }
    out_ext[a] = (in[a] + 2 * padding - k) / stride + 1;
  }
  check_finite(x, "conv3d");
  check_finite(weight, "conv3d");

  // Visits every (output site, kernel offset, input site) triple in a fixed order.
  auto for_each_tap = [=](auto&& fn) {
    const auto pad = static_cast<std::ptrdiff_t>(padding);
    for (std::size_t ox = 0; ox < out_ext[0]; ++ox)
      for (std::size_t oy = 0; oy < out_ext[1]; ++oy)
        for (std::size_t oz = 0; oz < out_ext[2]; ++oz) {
          const std::size_t out_site = (ox * out_ext[1] + oy) * out_ext[2] + oz;
          for (std::size_t dx = 0; dx < k; ++dx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + dx) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in[0])) continue;
            for (std::size_t dy = 0; dy < k; ++dy) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * stride + dy) - pad;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in[1])) continue;
              for (std::size_t dz = 0; dz < k; ++dz) {
                const auto iz = static_cast<std::ptrdiff_t>(oz * stride + dz) - pad;
                if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(in[2])) continue;
                const std::size_t in_site = (static_cast<std::size_t>(ix) * in[1] + static_cast<std::size_t>(iy)) * in[2] +
                                            static_cast<std::size_t>(iz);
                fn(out_site, (dx * k + dy) * k + dz, in_site);
              }
            }
          }
        }
  };

  std::vector<double> out(out_ext[0] * out_ext[1] * out_ext[2] * cout, 0.0);
  auto xv = x.values();
  auto wv = weight.values();
  for_each_tap([&](std::size_t os, std::size_t off, std::size_t is) {
    double* o = out.data() + os * cout;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double v = xv[is * cin + ci];
      const double* w = wv.data() + (off * cin + ci) * cout;
      for (std::size_t co = 0; co < cout; ++co) o[co] += v * w[co];
    }
  });
  Shape out_shape{out_ext[0], out_ext[1], out_ext[2], cout};
  return finish(Tensor(out_shape, std::move(out)), "conv3d", {x, weight},
                [x, weight, for_each_tap, cin, cout](auto g, auto gi) {
                  auto xv = x.values();
                  auto wv = weight.values();
                  for_each_tap([&](std::size_t os, std::size_t off, std::size_t is) {
                    const double* go = g.data() + os * cout;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                      const std::size_t wbase = (off * cin + ci) * cout;
                      if (gi[0]) {
                        double acc = 0.0;
                        for (std::size_t co = 0; co < cout; ++co) acc += go[co] * wv[wbase + co];
                        (*gi[0])[is * cin + ci] += acc;
                      }
                      if (gi[1]) {
                        const double v = xv[is * cin + ci];
                        for (std::size_t co = 0; co < cout; ++co) (*gi[1])[wbase + co] += v * go[co];
                      }
                    }
                  });
                });
}

std::size_t Rulebook::pair_count() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.size();
  return n;
}

Tensor sparse_conv(const Tensor& x, const Rulebook& rules, const Tensor& weight) {
  check_rank(x, 2, "sparse_conv");
  check_rank(weight, 3, "sparse_conv");
  const std::size_t cin = x.dim(1), cout = weight.dim(2);
  if (weight.dim(0) != rules.kernel_volume || weight.dim(1) != cin || rules.pairs.size() != rules.kernel_volume ||
      x.dim(0) != rules.in_rows) {
    fail(ErrorKind::Shape, "sparse_conv: shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(weight.shape()));
  }
  check_finite(x, "sparse_conv");
  check_finite(weight, "sparse_conv");
  std::vector<double> out(rules.out_rows * cout, 0.0);
  auto xv = x.values();
  auto wv = weight.values();
  for (std::size_t off = 0; off < rules.kernel_volume; ++off) {
    for (auto [i, o] : rules.pairs[off]) {
      double* dst = out.data() + o * cout;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double v = xv[i * cin + ci];
        const double* w = wv.data() + (off * cin + ci) * cout;
        for (std::size_t co = 0; co < cout; ++co) dst[co] += v * w[co];
      }
    }
  }
  auto shared_rules = std::make_shared<const Rulebook>(rules);
  return finish(Tensor({rules.out_rows, cout}, std::move(out)), "sparse_conv", {x, weight},
                [x, weight, shared_rules, cin, cout](auto g, auto gi) {
                  auto xv = x.values();
                  auto wv = weight.values();
                  const auto& rb = *shared_rules;
                  for (std::size_t off = 0; off < rb.kernel_volume; ++off) {
                    for (auto [i, o] : rb.pairs[off]) {
                      const double* go = g.data() + o * cout;
                      for (std::size_t ci = 0; ci < cin; ++ci) {
                        const std::size_t wbase = (off * cin + ci) * cout;
                        if (gi[0]) {
                          double acc = 0.0;
                          for (std::size_t co = 0; co < cout; ++co) acc += go[co] * wv[wbase + co];
                          (*gi[0])[i * cin + ci] += acc;
                        }
                        if (gi[1]) {
                          const double v = xv[i * cin + ci];
                          for (std::size_t co = 0; co < cout; ++co) (*gi[1])[wbase + co] += v * go[co];
                        }
                      }
                    }
                  }
                });
}

}  // namespace gcnv
