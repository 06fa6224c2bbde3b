#include "expe/transformer/config_json.hpp"

#include <algorithm>

namespace expe::nn {

using namespace expe::pos;

ModelConfig read_model_config(FieldReader& m, FieldReader& e) {
  ModelConfig cfg;
  m.get_count("vocab_size", cfg.vocab_size);
  m.get_count("seq_len", cfg.seq_len);
  m.get_count("d_model", cfg.d_model);
  m.get_count("n_heads", cfg.n_heads);
  std::optional<std::size_t> head_size;
  m.get_count("head_size", head_size);
  m.get_count("n_layers", cfg.n_layers);
  std::optional<std::size_t> ffn_hidden;
  m.get_count("ffn_hidden", ffn_hidden);
  m.get("dropout", cfg.dropout);
  m.get("tie_embeddings", cfg.tie_embeddings);
  m.get("rms_eps", cfg.rms_eps);
  m.get("init_std", cfg.init_std);
  m.get("apply_to_value", cfg.apply_to_value);
  m.reject_unknown();

  if (cfg.vocab_size < 2) m.error("vocab_size", "must be at least 2");
  if (cfg.seq_len < 1) m.error("seq_len", "must be positive");
  if (cfg.d_model < 1) m.error("d_model", "must be positive");
  if (cfg.n_layers < 1) m.error("n_layers", "must be positive");
  if (cfg.n_heads < 1) m.error("n_heads", "must be positive");
  cfg.head_size = head_size.value_or(cfg.n_heads ? cfg.d_model / cfg.n_heads : 0);
  if (cfg.head_size < 1) m.error("head_size", "must be positive");
  if (cfg.n_heads * cfg.head_size != cfg.d_model) {
    m.error("head_size", "n_heads * head_size must equal d_model (" + std::to_string(cfg.n_heads) + " * " +
                             std::to_string(cfg.head_size) + " != " + std::to_string(cfg.d_model) + ")");
  }
  cfg.ffn_hidden = ffn_hidden.value_or(4 * cfg.d_model);
  if (cfg.ffn_hidden < 1) m.error("ffn_hidden", "must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) m.error("dropout", "must lie in [0, 1)");
  if (!(cfg.rms_eps >= 0.0)) m.error("rms_eps", "must be non-negative");
  if (!(cfg.init_std >= 0.0)) m.error("init_std", "must be non-negative");

  std::string type = "expe";
  e.get("type", type);
  double start = 0.0;
  e.get("S", start);
  std::optional<double> theta, theta1;
  double theta2 = 1.0 / 16.0;
  e.get("theta", theta);
  e.get("theta1", theta1);
  e.get("theta2", theta2);
  std::optional<std::size_t> width;
  e.get_count("l", width);
  double scale = 1.0;
  e.get("scale", scale);
  double rope_theta = 10000.0;
  e.get("rope_theta", rope_theta);
  std::optional<std::size_t> max_len;
  e.get_count("max_len", max_len);
  bool stable_p = false, apply_once = false;
  e.get("stable_p", stable_p);
  e.get("apply_once", apply_once);
  std::string learned = "off";
  e.get("learned", learned);
  e.reject_unknown();

  const double default_theta = cfg.seq_len ? 1.0 / (2.0 * static_cast<double>(cfg.seq_len)) : 0.0;
  const std::size_t l = width.value_or(std::max<std::size_t>(1, cfg.d_model / 8));
  SchemeKind kind = SchemeKind::expe;
  try {
    kind = scheme_kind_from_string(type);
  } catch (const ConfigError&) {
    e.error("type", "unknown encoding '" + type + "' (expected expe, exqpe, rope, sinusoidal, learned_absolute)");
  }
  switch (kind) {
    case SchemeKind::expe:
      cfg.encoding.params = ExpeParams{start, theta.value_or(default_theta), l, scale};
      break;
    case SchemeKind::exqpe:
      cfg.encoding.params = ExqpeParams{start, theta1.value_or(theta.value_or(default_theta)), theta2, l, scale};
      break;
    case SchemeKind::rope:
      cfg.encoding.params = RopeParams{rope_theta};
      break;
    case SchemeKind::sinusoidal:
      cfg.encoding.params = SinusoidalParams{};
      break;
    case SchemeKind::learned_absolute:
      cfg.encoding.params = LearnedAbsoluteParams{max_len.value_or(cfg.seq_len)};
      break;
  }
  cfg.encoding.ablation.stable_p = stable_p;
  cfg.encoding.ablation.apply_once = apply_once;
  try {
    cfg.encoding.ablation.learned = learned_mode_from_string(learned);
  } catch (const ConfigError&) {
    e.error("learned", "must be off, learned_random or learned_initialized");
  }

  if (cfg.encoding.is_override()) {
    if (l < 1) e.error("l", "must be at least 1");
    if (l > cfg.d_model) {
      e.error("l", "must not exceed model.d_model (" + std::to_string(l) + " > " + std::to_string(cfg.d_model) + ")");
    }
    if (!(scale > 0.0)) e.error("scale", "must be positive");
    if (kind == SchemeKind::expe && !(std::get<ExpeParams>(cfg.encoding.params).theta > 0.0)) {
      e.error("theta", "must be positive");
    }
    if (kind == SchemeKind::exqpe) {
      const auto& q = std::get<ExqpeParams>(cfg.encoding.params);
      if (!(q.theta1 >= 0.0)) e.error("theta1", "must be non-negative");
      if (!(q.theta2 > 0.0)) e.error("theta2", "must be positive");
    }
  }
  if (kind == SchemeKind::rope) {
    if (!(rope_theta > 0.0)) e.error("rope_theta", "must be positive");
    if (cfg.head_size % 2 != 0) m.error("head_size", "must be even for rope");
  }
  if (kind == SchemeKind::sinusoidal && cfg.d_model % 2 != 0) m.error("d_model", "must be even for sinusoidal");
  if (kind == SchemeKind::learned_absolute && max_len && *max_len < 1) e.error("max_len", "must be positive");
  const bool flags = stable_p || apply_once || cfg.encoding.ablation.learned != LearnedMode::off;
  if (flags && !cfg.encoding.is_override()) e.error("type", "ablation flags need expe or exqpe");
  if (cfg.encoding.ablation.learned != LearnedMode::off && kind != SchemeKind::expe) {
    e.error("learned", "learned start/theta needs type expe");
  }
  if (cfg.apply_to_value && !cfg.encoding.is_override()) m.error("apply_to_value", "needs an expe or exqpe encoding");
  return cfg;
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json model = {
      {"vocab_size", cfg.vocab_size}, {"seq_len", cfg.seq_len},       {"d_model", cfg.d_model},
      {"n_heads", cfg.n_heads},       {"head_size", cfg.head_size},   {"n_layers", cfg.n_layers},
      {"ffn_hidden", cfg.ffn_hidden}, {"dropout", cfg.dropout},       {"tie_embeddings", cfg.tie_embeddings},
      {"rms_eps", cfg.rms_eps},       {"init_std", cfg.init_std},     {"apply_to_value", cfg.apply_to_value},
  };
  nlohmann::json enc = {{"type", cfg.encoding.name()}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ExpeParams>) {
          enc["S"] = p.start;
          enc["theta"] = p.theta;
          enc["l"] = p.width;
          enc["scale"] = p.scale;
        } else if constexpr (std::is_same_v<P, ExqpeParams>) {
          enc["S"] = p.start;
          enc["theta1"] = p.theta1;
          enc["theta2"] = p.theta2;
          enc["l"] = p.width;
          enc["scale"] = p.scale;
        } else if constexpr (std::is_same_v<P, RopeParams>) {
          enc["rope_theta"] = p.theta_base;
        } else if constexpr (std::is_same_v<P, LearnedAbsoluteParams>) {
          enc["max_len"] = p.max_len;
        }
      },
      cfg.encoding.params);
  if (cfg.encoding.is_override()) {
    enc["stable_p"] = cfg.encoding.ablation.stable_p;
    enc["apply_once"] = cfg.encoding.ablation.apply_once;
    enc["learned"] = to_string(cfg.encoding.ablation.learned);
  }
  return {{"model", model}, {"encoding", enc}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  FieldReader root(j, "", errors);
  auto m = root.child("model");
  auto e = root.child("encoding");
  auto cfg = read_model_config(m, e);
  root.reject_unknown();
  if (!errors.empty()) throw ConfigValidationError(errors);
  return cfg;
}

}  // namespace expe::nn
