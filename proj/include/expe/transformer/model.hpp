#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "expe/numerics/ops.hpp"
#include "expe/numerics/optim.hpp"
#include "expe/numerics/rng.hpp"
#include "expe/positional/apply.hpp"
#include "expe/transformer/attention.hpp"
#include "expe/transformer/config.hpp"

namespace expe::nn {

using num::TokenId;

template <typename T>
struct Block {
  Tensor<T> attn_norm;  // [d]
  Tensor<T> wq, wk, wv, wo;  // [d, d]
  Tensor<T> ffn_norm;  // [d]
  Tensor<T> w_gate, w_up;  // [d, hidden]
  Tensor<T> w_down;  // [hidden, d]
};

struct ForwardOptions {
  std::uint64_t offset = 0;
  bool training = false;
  // Evaluate with a different scheme of the same kind (e.g. a scaled copy)
  // without touching the weights.
  const pos::EncodingScheme* encoding = nullptr;
};

// Position state shared by every block during one forward pass.
template <typename T>
struct EncodingContext {
  const pos::EncodingScheme* scheme = nullptr;
  Tensor<T> override_table;  // [seq, l] for ExPE/ExQPE
  std::uint64_t offset = 0;
};

// Pre-norm decoder-only transformer with RMSNorm and a SwiGLU feed-forward.
//
// ExPE/ExQPE override the first l dims of the normalised copy that feeds
// W_q/W_k (and W_v when apply_to_value) in every block, or only block 0 under
// apply_once; the residual stream keeps the original values. RoPE rotates q/k
// in every block. Sinusoidal and learned-absolute tables are added to the
// token embeddings once, before block 0 (sinusoidal after scaling the
// embeddings by sqrt(d_model)).
template <typename T>
class Transformer {
 public:
  Transformer(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<num::ParamRef<T>> parameters() const;
  std::size_t parameter_count() const;

  // tokens: batch * seq ids -> logits [batch, seq, vocab].
  Tensor<T> forward(std::span<const TokenId> tokens, std::size_t batch, std::size_t seq,
                    const ForwardOptions& opts = {});

  // Mean next-token loss; targets follow the layout of tokens.
  Tensor<T> loss(std::span<const TokenId> tokens, std::span<const TokenId> targets, std::size_t batch,
                 std::size_t seq, const ForwardOptions& opts = {});

  // Token embedding lookup, [batch, seq, d].
  Tensor<T> embed(std::span<const TokenId> tokens, std::size_t batch, std::size_t seq) const;

  // Everything after the lookup: additive encoding, blocks, final norm, output projection.
  Tensor<T> forward_embeddings(const Tensor<T>& x, const ForwardOptions& opts = {});

  Tensor<T> block_forward(std::size_t index, const Tensor<T>& x, const EncodingContext<T>& ctx, bool training);

  Tensor<T> mha_forward(std::size_t index, const Tensor<T>& normed, const EncodingContext<T>& ctx, bool training);

  // Projections W_q, W_k of block `index` for block input x ([batch, seq, d]),
  // including norm and positional treatment. Not recorded.
  std::pair<Tensor<T>, Tensor<T>> project_qk(std::size_t index, const Tensor<T>& x, const ForwardOptions& opts = {});

  EncodingContext<T> make_context(std::size_t seq, const ForwardOptions& opts) const;

  bool block_encoding(std::size_t index) const { return encode_block_.at(index); }
  void set_block_encoding(std::size_t index, bool enabled) { encode_block_.at(index) = enabled; }

  std::vector<Block<T>>& blocks() { return blocks_; }
  Tensor<T>& token_embedding() { return tok_emb_; }
  const std::optional<pos::LearnedScalars<T>>& learned_scalars() const { return learned_; }
  num::Rng& dropout_rng() { return dropout_rng_; }

  // FNV-1a over every parameter's bytes in parameters() order.
  std::uint64_t checksum() const;

 private:
  const AttentionMask& mask_for(std::size_t seq);

  ModelConfig config_;
  Tensor<T> tok_emb_;
  Tensor<T> out_proj_;  // [d, vocab] when untied
  Tensor<T> pos_table_;  // learned absolute [max_len, d]
  std::optional<pos::LearnedScalars<T>> learned_;
  std::vector<Block<T>> blocks_;
  Tensor<T> final_norm_;
  std::vector<bool> encode_block_;
  std::map<std::size_t, AttentionMask> masks_;
  Tensor<T> sinusoid_cache_;
  num::Rng dropout_rng_;
};

}  // namespace expe::nn
