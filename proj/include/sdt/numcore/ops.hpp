#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdt/numcore/rng.hpp"
#include "sdt/numcore/tensor.hpp"

namespace sdt {

// Differentiable operations. Matrices are rank-2 [rows x cols]; vectors are
// rank-1. Every op validates shapes and throws DimensionError on mismatch.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise (Hadamard) product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x[N x d] + bias[d] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x[N x d] + linear map: x * weight[d x out] + bias[out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

/// Max-subtracted softmax along `axis` (any rank).
Tensor softmax(const Tensor& x, std::size_t axis);
/// Row softmax of x[T_q x T_k] restricted to keys with key_valid[j] != 0.
/// Invalid keys get weight exactly 0. Throws UsageError if no key is valid.
Tensor masked_softmax_rows(const Tensor& x, std::span<const std::uint8_t> key_valid);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Columns [start, start + len) of a matrix.
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len);
/// Stacks same-shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);
/// Sub-tensor at `index` of the leading axis.
Tensor select(const Tensor& x, std::size_t index);

/// Per-row normalisation of x[N x d] with affine gamma[d], beta[d].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

/// Inverted dropout. Identity when !training or rate == 0. rate must be in [0, 1).
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

/// Same-padded cross-correlation over the row axis.
/// x[N x d_in], kernel[k x d_in x d_out], bias[d_out]; k must be odd.
/// y[i][o] = bias[o] + sum_t sum_c x[i + t - k/2][c] * kernel[t][c][o].
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

/// Row i of the result is column ids[i] of table[d x V]. Backward
/// scatter-adds into the looked-up columns.
Tensor gather_columns(const Tensor& table, std::span<const std::size_t> ids);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

}  // namespace sdt
