#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "expe/numerics/rng.hpp"
#include "expe/numerics/tape.hpp"
#include "expe/numerics/tensor.hpp"

namespace expe::num {

using TokenId = std::int32_t;

// Target id that cross_entropy skips.
inline constexpr TokenId kIgnoreIndex = -1;

// Differentiable ops. Each one records a backward rule on the active tape when
// a tape is active and any input requires gradients; otherwise it is a plain
// forward computation. Inputs are never mutated.
//
// "Row" below means a slice along the last axis; leading axes are flattened.

// a[..., k] x b[k, n] -> [..., n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// a[..., k] x b[n, k]^T -> [..., n]
template <typename T>
Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

// Sum of all elements as a [1] tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& a);

// x * sigmoid(x)
template <typename T>
Tensor<T> silu(const Tensor<T>& a);

// y = gain * x / sqrt(mean(x^2) + eps), per row.
template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x, const Tensor<T>& gain, T eps);

// Numerically stable softmax over the last axis.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

// Mean over non-ignored rows of -log softmax(logits)[target], in nats.
// targets.size() must equal logits.rows().
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const TokenId> targets);

// Per-row negative log-likelihood without recording; kIgnoreIndex rows give 0.
template <typename T>
std::vector<double> token_nll(const Tensor<T>& logits, std::span<const TokenId> targets);

// Gathers rows of table[V, d]; output shape is out_shape + [d].
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const TokenId> ids, const Shape& out_shape);

// Inverted dropout. Identity when !training or p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng);

}  // namespace expe::num
