#pragma once

#include <cstdint>
#include <vector>

#include "expe/numerics/rng.hpp"
#include "expe/numerics/tensor.hpp"

namespace expe::nn {

using num::Tensor;

// seq x seq visibility matrix; allowed(i, j) says whether query i may attend
// to key j.
class AttentionMask {
 public:
  AttentionMask(std::size_t seq, std::vector<std::uint8_t> allowed);

  std::size_t seq() const { return seq_; }
  bool allowed(std::size_t i, std::size_t j) const { return allowed_[i * seq_ + j] != 0; }
  std::size_t allowed_count() const;

 private:
  std::size_t seq_;
  std::vector<std::uint8_t> allowed_;
};

// allowed(i, j) iff j <= i.
AttentionMask causal_mask(std::size_t seq);

// Scaled dot-product attention per head. q, k, v: [..., seq, heads, head_dim].
// Blocked entries get -inf before the softmax. Attention-weight dropout is
// applied only when training and dropout > 0.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const AttentionMask& mask,
                    double dropout = 0.0, bool training = false, num::Rng* rng = nullptr);

// q k^T / sqrt(head_dim) before masking, as [batch, heads, seq, seq]. Not recorded.
template <typename T>
Tensor<T> attention_scores(const Tensor<T>& q, const Tensor<T>& k);

// Post-softmax weights as [batch, heads, seq, seq]. Not recorded.
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, const AttentionMask& mask);

}  // namespace expe::nn
