#pragma once

#include <cstddef>

#include "expe/positional/encoding.hpp"

namespace expe::nn {

struct ModelConfig {
  std::size_t vocab_size = 257;
  std::size_t seq_len = 64;  // training length
  std::size_t d_model = 128;
  std::size_t n_heads = 4;
  std::size_t head_size = 32;
  std::size_t n_layers = 4;
  std::size_t ffn_hidden = 512;
  double dropout = 0.1;
  // Tied output logits start with a large self term (about init_std * d_model).
  bool tie_embeddings = false;
  double rms_eps = 1e-5;
  double init_std = 0.02;
  // Also feed the encoded copy into W_v (ExPE/ExQPE only).
  bool apply_to_value = false;
  pos::EncodingScheme encoding{};

  void validate() const;
};

}  // namespace expe::nn
