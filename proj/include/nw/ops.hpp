#pragma once

// Differentiable ops. Tensors are row-major; "rows" is the leading
// dimension and "cols" the product of the rest. The only implicit
// broadcasting is a trailing-dimension row vector applied to every row
// (add_row / mul_row); everything else must match exactly.

#include "nw/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nw::ops {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

/// a[r, :] + row for every row; row has cols(a) entries.
Tensor add_row(const Tensor& a, const Tensor& row);
/// a[r, :] * row for every row.
Tensor mul_row(const Tensor& a, const Tensor& row);
/// a[r, :] * weights[r] with constant weights (masks, normalizers).
Tensor scale_rows(const Tensor& a, std::span<const double> weights);

/// [n, k] x [k, m] -> [n, m]. a may have rank > 2; it is viewed as [rows, cols].
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [R, in] * w [in, out] + bias [out] (bias may be undefined).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
/// Batched: a [B, n, k] x b [B, k, m] -> [B, n, m]; with trans_b, b is [B, m, k].
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor tanh(const Tensor& a);
/// expm1(z) / z, continuous at 0. Zero-order-hold input coefficient.
Tensor expm1_ratio(const Tensor& a);

/// Softmax over the last dimension.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
/// Normalizes over the last dimension, then gamma * xhat + beta.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// out[s, :] = sum of values[r, :] with ids[r] == s. ids == -1 are skipped.
Tensor segment_sum(const Tensor& values, std::span<const std::int64_t> ids, std::size_t n_segments);
/// segment_sum divided by the per-segment count; empty segments are zero.
Tensor segment_mean(const Tensor& values, std::span<const std::int64_t> ids, std::size_t n_segments);
/// Alias of segment_sum named for its role as gather's adjoint.
Tensor scatter_add(const Tensor& values, std::span<const std::int64_t> index, std::size_t n_out);
/// out[i, :] = x[index[i], :]; index == -1 yields a zero row.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index);

/// Depthwise 1D convolution with zero "same" padding inside each sequence.
/// x is [(S*T), C] holding S sequences of length T; kernel is [k, C], k odd.
Tensor conv1d(const Tensor& x, const Tensor& kernel, std::size_t seq_len);

enum class ScanMode { sequential, chunked };
/// h_t = a_t * h_{t-1} + b_t along each sequence of length seq_len; h_{-1} = 0.
/// a, b are [(S*T), C]. chunked uses a two-pass blocked evaluation.
Tensor associative_scan(const Tensor& a, const Tensor& b, std::size_t seq_len,
                        ScanMode mode = ScanMode::sequential);
/// Reverses every length-seq_len sequence in place order.
Tensor reverse_sequences(const Tensor& x, std::size_t seq_len);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// out[:, c*k + r] = x[:, c]
Tensor repeat_cols(const Tensor& x, std::size_t k);
/// out[:, r*C + c] = x[:, c]
Tensor tile_cols(const Tensor& x, std::size_t k);
/// out[:, c] = sum_r x[:, c*k + r]
Tensor sum_col_groups(const Tensor& x, std::size_t k);

Tensor mse_loss(const Tensor& pred, std::span<const double> target);
Tensor l1_loss(const Tensor& pred, std::span<const double> target);
/// Mean negative log-likelihood of integer labels under row-wise softmax.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int64_t> labels);

} // namespace nw::ops
