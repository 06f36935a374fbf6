#pragma once

#include <span>

#include "zskd/tensor.hpp"

namespace zskd {

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

// Strict 2-D matrix product [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// x[..., K] times w[K, N] -> [..., N]; leading dims are flattened into
// rows internally, no data movement.
Tensor linear(const Tensor& x, const Tensor& w);

// x[..., C] + bias[C].
Tensor add_bias(const Tensor& x, const Tensor& bias);

// x[B, L, H] + pos[P, H] broadcast over the batch dim, using the first L
// rows of the table (P >= L); gradients reach only those rows.
Tensor add_positions(const Tensor& x, const Tensor& pos);

// Batched product a[B, m, k] x b[B, k, n] -> [B, m, n]; with trans_b,
// b is [B, n, k] and used transposed.
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);

// [B, L, H] -> [B*heads, L, H/heads] and back.
Tensor split_heads(const Tensor& x, int64_t heads);
Tensor merge_heads(const Tensor& x, int64_t heads);

// scores[B*heads, L, L] += bias[B, Lk] along the key axis.
Tensor add_key_bias(const Tensor& scores, const Tensor& bias, int64_t heads);

// Temperature softmax over the last axis, max-subtracted for stability.
Tensor softmax(const Tensor& x, double temperature = 1.0);

// Row-wise normalization over the last axis with learned gain and shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor gelu(const Tensor& x);

// Row gather: table[V, H] indexed by ids -> [N, H] (N = ids.size()).
// The result keeps the provided leading shape: out_shape + [H].
Tensor embedding(const Tensor& table, std::span<const int32_t> ids,
                 Shape out_leading);

// x[B, L, H] -> [B, H] picking one sequence position.
Tensor take_position(const Tensor& x, int64_t position);

Tensor reshape(const Tensor& x, Shape new_shape);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Mean of (logsumexp(z_row) - z_row[label]); gradients are the usual
// softmax-minus-one-hot divided by the row count.
Tensor cross_entropy_with_logits(const Tensor& logits,
                                 std::span<const int32_t> labels);

namespace detail {
// C[m,n] += A[m,k] * B[k,n]
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k,
           int64_t n);
// C[m,n] += A[m,k] * B[n,k]^T
void mm_nt(const double* a, const double* b, double* c, int64_t m, int64_t k,
           int64_t n);
// C[k,n] += A[m,k]^T * B[m,n]
void mm_tn(const double* a, const double* b, double* c, int64_t m, int64_t k,
           int64_t n);
}  // namespace detail

}  // namespace zskd
