#pragma once

#include <cstdint>

#include "expe/numerics/rng.hpp"
#include "expe/numerics/tensor.hpp"
#include "expe/positional/encoding.hpp"

namespace expe::pos {

using num::Tensor;

// Inputs to these ops have shape [..., seq, d]; row t of each sequence sits at
// absolute position offset + t. All ops return new tensors and record on the
// active tape like the numerics ops.

// [rows x l] table of override position vectors for positions offset ..
// offset + rows - 1. Not differentiable.
template <typename T>
Tensor<T> override_table(const EncodingScheme& scheme, std::size_t rows, std::uint64_t offset);

// Copy of x whose first l dims of row t are replaced by table[t]; dims >= l are
// copied unchanged. Gradients flow to x's tail dims and to the table.
template <typename T>
Tensor<T> override_prefix(const Tensor<T>& x, const Tensor<T>& table);

template <typename T>
Tensor<T> expe_apply(const Tensor<T>& x, const ExpeParams& p, std::uint64_t offset, bool stable_p = false);

template <typename T>
Tensor<T> exqpe_apply(const Tensor<T>& x, const ExqpeParams& p, std::uint64_t offset);

// Trainable ExPE start/theta.
template <typename T>
struct LearnedScalars {
  Tensor<T> start;  // [1]
  Tensor<T> theta;  // [1]
};

// learned_initialized copies the fixed values; learned_random draws both from
// N(0, init_std^2).
template <typename T>
LearnedScalars<T> learned_scalar_params(LearnedMode mode, const ExpeParams& p, double init_std,
                                        num::Rng& rng);

// Differentiable ExPE table built from learned start/theta:
//   table[t][j] = scale * (start + theta * k), k = offset + t (+ j unless stable_p).
template <typename T>
Tensor<T> learned_expe_table(const LearnedScalars<T>& scalars, double scale, std::size_t width,
                             std::size_t rows, std::uint64_t offset, bool stable_p);

// [max_len x d] table, row i: (sin(i / 10000^(2t/d)), cos(i / 10000^(2t/d)))
// interleaved at columns 2t, 2t + 1.
template <typename T>
Tensor<T> sinusoidal_table(std::size_t max_len, std::size_t d);

// Row t of every sequence gains table[offset + t]. Throws LengthExceededError
// when the table has too few rows.
template <typename T>
Tensor<T> additive_apply(const Tensor<T>& x, const Tensor<T>& table, std::uint64_t offset);

// x: [..., seq, heads, head_dim]. Pair (2t, 2t+1) of every head at position m
// is rotated by m * theta_base^(-2t / head_dim).
template <typename T>
Tensor<T> rope_apply(const Tensor<T>& x, const RopeParams& p, std::uint64_t offset);

}  // namespace expe::pos
