#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gcnv/tensor/tensor.hpp"

// Differentiable primitives. Every function validates shapes, rejects
// non-finite inputs, and records itself on the tape of its tracked inputs.
// Matrices are rank-2 tensors [rows, cols]; "rows" ops treat the leading axis
// as the item axis and the last axis as channels.
namespace gcnv {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

// x[n, c] + v[c] broadcast over rows.
Tensor add_rowvec(const Tensor& x, const Tensor& v);

Tensor sigmoid(const Tensor& x);
// tanh-form GELU.
Tensor gelu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Column sums of x[n, c] -> [c].
Tensor sum_rows(const Tensor& x);
// Column maxima of x[n, c] -> [c] (max-reduce over the item axis, n >= 1).
// Ties route the gradient to the first maximal row.
Tensor max_rows(const Tensor& x);

// Softmax / log-softmax over the last axis.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);

// Per-row layer normalization of x[n, c] with affine gamma[c], beta[c].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Per-row l_p norm of x[n, c] -> [n]. The gradient at a zero row is zero.
Tensor lp_norm_rows(const Tensor& x, int p = 2);

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
// Scatter-add rows of x[m, c] into a zero [n, c] matrix.
Tensor scatter_rows(const Tensor& x, std::span<const std::size_t> rows, std::size_t n);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);

// Dense 3D convolution, channels-last, cubic kernel, zero padding, no bias.
// x[H, W, D, Cin], weight[k, k, k, Cin, Cout] -> [H', W', D', Cout] with
// H' = (H + 2*padding - k) / stride + 1.
Tensor conv3d(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t padding = 0);

// Gather/scatter plan for a sparse convolution: for every kernel offset, the
// (input row, output row) pairs whose sites are both occupied.
struct Rulebook {
  std::size_t kernel_volume = 0;
  std::size_t in_rows = 0;
  std::size_t out_rows = 0;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> pairs;

  std::size_t pair_count() const;
};

// x[n_in, Cin], weight[K, Cin, Cout] -> [n_out, Cout].
Tensor sparse_conv(const Tensor& x, const Rulebook& rules, const Tensor& weight);

}  // namespace gcnv
