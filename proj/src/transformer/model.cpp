#include "expe/transformer/model.hpp"

#include <cmath>
#include <cstring>

#include "expe/error.hpp"

namespace expe::nn {

using pos::SchemeKind;

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("model: vocab_size must be at least 2");
  if (seq_len < 1) throw ConfigError("model: seq_len must be positive");
  if (n_layers < 1) throw ConfigError("model: n_layers must be positive");
  if (n_heads < 1 || head_size < 1) throw ConfigError("model: n_heads and head_size must be positive");
  if (n_heads * head_size != d_model) throw ConfigError("model: n_heads * head_size must equal d_model");
  if (ffn_hidden < 1) throw ConfigError("model: ffn_hidden must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  if (!(rms_eps >= 0.0)) throw ConfigError("model: rms_eps must be non-negative");
  if (!(init_std >= 0.0)) throw ConfigError("model: init_std must be non-negative");
  if (apply_to_value && !encoding.is_override()) {
    throw ConfigError("model: apply_to_value needs an expe/exqpe encoding");
  }
  encoding.validate(d_model, head_size);
}

template <typename T>
Transformer<T>::Transformer(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), dropout_rng_(num::mix_seed(seed, 0xD50u)) {
  config_.validate();
  num::Rng rng(num::mix_seed(seed, 0x1417u));
  const auto d = config_.d_model;
  const auto hidden = config_.ffn_hidden;
  const double std = config_.init_std;
  const double resid_std = std / std::sqrt(2.0 * static_cast<double>(config_.n_layers));

  tok_emb_ = num::gaussian_init<T>({config_.vocab_size, d}, std, rng, true);
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    Block<T> b;
    b.attn_norm = Tensor<T>({d}, std::vector<T>(d, T{1}), true);
    b.wq = num::gaussian_init<T>({d, d}, std, rng, true);
    b.wk = num::gaussian_init<T>({d, d}, std, rng, true);
    b.wv = num::gaussian_init<T>({d, d}, std, rng, true);
    b.wo = num::gaussian_init<T>({d, d}, resid_std, rng, true);
    b.ffn_norm = Tensor<T>({d}, std::vector<T>(d, T{1}), true);
    b.w_gate = num::gaussian_init<T>({d, hidden}, std, rng, true);
    b.w_up = num::gaussian_init<T>({d, hidden}, std, rng, true);
    b.w_down = num::gaussian_init<T>({hidden, d}, resid_std, rng, true);
    blocks_.push_back(std::move(b));
  }
  final_norm_ = Tensor<T>({d}, std::vector<T>(d, T{1}), true);
  if (!config_.tie_embeddings) out_proj_ = num::gaussian_init<T>({d, config_.vocab_size}, std, rng, true);

  const auto& enc = config_.encoding;
  if (enc.kind() == SchemeKind::learned_absolute) {
    const auto max_len = std::get<pos::LearnedAbsoluteParams>(enc.params).max_len;
    pos_table_ = num::gaussian_init<T>({max_len, d}, std, rng, true);
  }
  if (enc.ablation.learned != pos::LearnedMode::off) {
    learned_ = pos::learned_scalar_params<T>(enc.ablation.learned, std::get<pos::ExpeParams>(enc.params), std, rng);
  }

  encode_block_.assign(config_.n_layers, false);
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    switch (enc.kind()) {
      case SchemeKind::expe:
      case SchemeKind::exqpe:
        encode_block_[i] = !enc.ablation.apply_once || i == 0;
        break;
      case SchemeKind::rope:
        encode_block_[i] = true;
        break;
      default:
        break;
    }
  }
}

template <typename T>
std::vector<num::ParamRef<T>> Transformer<T>::parameters() const {
  std::vector<num::ParamRef<T>> out;
  out.push_back({"tok_emb", tok_emb_, false});
  if (pos_table_.defined()) out.push_back({"pos_table", pos_table_, false});
  if (learned_) {
    out.push_back({"pos_start", learned_->start, false});
    out.push_back({"pos_theta", learned_->theta, false});
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::string p = "blocks." + std::to_string(i) + ".";
    out.push_back({p + "attn_norm", b.attn_norm, false});
    out.push_back({p + "wq", b.wq, true});
    out.push_back({p + "wk", b.wk, true});
    out.push_back({p + "wv", b.wv, true});
    out.push_back({p + "wo", b.wo, true});
    out.push_back({p + "ffn_norm", b.ffn_norm, false});
    out.push_back({p + "w_gate", b.w_gate, true});
    out.push_back({p + "w_up", b.w_up, true});
    out.push_back({p + "w_down", b.w_down, true});
  }
  out.push_back({"final_norm", final_norm_, false});
  if (out_proj_.defined()) out.push_back({"out_proj", out_proj_, true});
  return out;
}

template <typename T>
std::size_t Transformer<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
const AttentionMask& Transformer<T>::mask_for(std::size_t seq) {
  auto it = masks_.find(seq);
  if (it == masks_.end()) it = masks_.emplace(seq, causal_mask(seq)).first;
  return it->second;
}

template <typename T>
EncodingContext<T> Transformer<T>::make_context(std::size_t seq, const ForwardOptions& opts) const {
  EncodingContext<T> ctx;
  ctx.scheme = opts.encoding ? opts.encoding : &config_.encoding;
  ctx.offset = opts.offset;
  if (ctx.scheme->kind() != config_.encoding.kind()) {
    throw UnsupportedSchemeError("forward: cannot evaluate a " + config_.encoding.name() + " model with " +
                                 ctx.scheme->name() + " positions");
  }
  if (ctx.scheme->is_override()) {
    if (ctx.scheme->width() > config_.d_model) throw ConfigError("encoding.l exceeds d_model");
    if (learned_) {
      const auto& e = std::get<pos::ExpeParams>(ctx.scheme->params);
      ctx.override_table =
          pos::learned_expe_table(*learned_, e.scale, e.width, seq, opts.offset, ctx.scheme->ablation.stable_p);
    } else {
      ctx.override_table = pos::override_table<T>(*ctx.scheme, seq, opts.offset);
    }
  }
  return ctx;
}

template <typename T>
Tensor<T> Transformer<T>::embed(std::span<const TokenId> tokens, std::size_t batch, std::size_t seq) const {
  if (tokens.size() != batch * seq) {
    throw DimensionError("forward: " + std::to_string(tokens.size()) + " tokens for batch " + std::to_string(batch) +
                         " x seq " + std::to_string(seq));
  }
  return num::embedding(tok_emb_, tokens, {batch, seq});
}

template <typename T>
Tensor<T> Transformer<T>::forward(std::span<const TokenId> tokens, std::size_t batch, std::size_t seq,
                                  const ForwardOptions& opts) {
  return forward_embeddings(embed(tokens, batch, seq), opts);
}

template <typename T>
Tensor<T> Transformer<T>::loss(std::span<const TokenId> tokens, std::span<const TokenId> targets, std::size_t batch,
                               std::size_t seq, const ForwardOptions& opts) {
  return num::cross_entropy(forward(tokens, batch, seq, opts), targets);
}

template <typename T>
Tensor<T> Transformer<T>::forward_embeddings(const Tensor<T>& x_in, const ForwardOptions& opts) {
  if (x_in.rank() != 3 || x_in.dim(2) != config_.d_model) {
    throw DimensionError("forward: expected [batch, seq, " + std::to_string(config_.d_model) + "], got " +
                         num::shape_str(x_in.shape()));
  }
  const auto seq = x_in.dim(1);
  auto ctx = make_context(seq, opts);
  Tensor<T> x = x_in;
  switch (config_.encoding.kind()) {
    case SchemeKind::sinusoidal: {
      const auto needed = opts.offset + seq;
      if (!sinusoid_cache_.defined() || sinusoid_cache_.dim(0) < needed) {
        sinusoid_cache_ = pos::sinusoidal_table<T>(std::max<std::size_t>(needed, config_.seq_len), config_.d_model);
      }
      // Embeddings are scaled by sqrt(d) so the unit-amplitude table does not drown them.
      const auto emb_scale = static_cast<T>(std::sqrt(static_cast<double>(config_.d_model)));
      x = pos::additive_apply(num::scale(x, emb_scale), sinusoid_cache_, opts.offset);
      break;
    }
    case SchemeKind::learned_absolute:
      x = pos::additive_apply(x, pos_table_, opts.offset);
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) x = block_forward(i, x, ctx, opts.training);
  auto h = num::rms_norm(x, final_norm_, static_cast<T>(config_.rms_eps));
  return config_.tie_embeddings ? num::matmul_bt(h, tok_emb_) : num::matmul(h, out_proj_);
}

template <typename T>
Tensor<T> Transformer<T>::block_forward(std::size_t index, const Tensor<T>& x, const EncodingContext<T>& ctx,
                                        bool training) {
  const auto& b = blocks_.at(index);
  const auto eps = static_cast<T>(config_.rms_eps);
  auto attn = mha_forward(index, num::rms_norm(x, b.attn_norm, eps), ctx, training);
  auto h = num::add(x, attn);
  auto normed = num::rms_norm(h, b.ffn_norm, eps);
  auto gate = num::silu(num::matmul(normed, b.w_gate));
  auto ffn = num::matmul(num::mul(gate, num::matmul(normed, b.w_up)), b.w_down);
  ffn = num::dropout(ffn, config_.dropout, training, dropout_rng_);
  return num::add(h, ffn);
}

template <typename T>
Tensor<T> Transformer<T>::mha_forward(std::size_t index, const Tensor<T>& normed, const EncodingContext<T>& ctx,
                                      bool training) {
  const auto& b = blocks_.at(index);
  const bool encode = encode_block_.at(index);
  const auto kind = ctx.scheme->kind();
  Tensor<T> qk_in = normed;
  Tensor<T> v_in = normed;
  if (encode && ctx.scheme->is_override()) {
    qk_in = pos::override_prefix(normed, ctx.override_table);
    if (config_.apply_to_value) v_in = qk_in;
  }
  auto q = num::matmul(qk_in, b.wq);
  auto k = num::matmul(qk_in, b.wk);
  auto v = num::matmul(v_in, b.wv);
  const auto batch = normed.dim(0);
  const auto seq = normed.dim(1);
  const num::Shape split{batch, seq, config_.n_heads, config_.head_size};
  auto q4 = q.view(split);
  auto k4 = k.view(split);
  if (encode && kind == SchemeKind::rope) {
    const auto& rp = std::get<pos::RopeParams>(ctx.scheme->params);
    q4 = pos::rope_apply(q4, rp, ctx.offset);
    k4 = pos::rope_apply(k4, rp, ctx.offset);
  }
  auto o = attention(q4, k4, v.view(split), mask_for(seq), config_.dropout, training, &dropout_rng_);
  return num::matmul(o.view({batch, seq, config_.d_model}), b.wo);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> Transformer<T>::project_qk(std::size_t index, const Tensor<T>& x,
                                                           const ForwardOptions& opts) {
  num::NoGradScope<T> no_grad;
  const auto& b = blocks_.at(index);
  auto ctx = make_context(x.dim(1), opts);
  auto normed = num::rms_norm(x, b.attn_norm, static_cast<T>(config_.rms_eps));
  Tensor<T> qk_in = normed;
  if (encode_block_.at(index) && ctx.scheme->is_override()) qk_in = pos::override_prefix(normed, ctx.override_table);
  auto q = num::matmul(qk_in, b.wq);
  auto k = num::matmul(qk_in, b.wk);
  if (encode_block_.at(index) && ctx.scheme->kind() == SchemeKind::rope) {
    const num::Shape split{x.dim(0), x.dim(1), config_.n_heads, config_.head_size};
    const auto& rp = std::get<pos::RopeParams>(ctx.scheme->params);
    q = pos::rope_apply(q.view(split), rp, ctx.offset).view(x.shape());
    k = pos::rope_apply(k.view(split), rp, ctx.offset).view(x.shape());
  }
  return {q, k};
}

template <typename T>
std::uint64_t Transformer<T>::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : parameters()) {
    for (auto v : p.tensor.data()) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      for (auto c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
      }
    }
  }
  return h;
}

template class Transformer<float>;
template class Transformer<double>;

}  // namespace expe::nn
