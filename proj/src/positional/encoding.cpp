#include "expe/positional/encoding.hpp"

#include "expe/error.hpp"

namespace expe::pos {

std::size_t EncodingScheme::width() const {
  if (const auto* e = std::get_if<ExpeParams>(&params)) return e->width;
  if (const auto* q = std::get_if<ExqpeParams>(&params)) return q->width;
  return 0;
}

double EncodingScheme::scale() const {
  if (const auto* e = std::get_if<ExpeParams>(&params)) return e->scale;
  if (const auto* q = std::get_if<ExqpeParams>(&params)) return q->scale;
  return 1.0;
}

std::string EncodingScheme::name() const { return to_string(kind()); }

void EncodingScheme::validate(std::size_t d_model, std::size_t head_dim) const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  switch (kind()) {
    case SchemeKind::expe: {
      const auto& e = std::get<ExpeParams>(params);
      if (e.width < 1 || e.width > d_model) fail("expe: width l must lie in [1, d_model]");
      if (!(e.theta > 0.0)) fail("expe: theta must be positive");
      if (!(e.scale > 0.0)) fail("expe: scale must be positive");
      break;
    }
    case SchemeKind::exqpe: {
      const auto& q = std::get<ExqpeParams>(params);
      if (q.width < 1 || q.width > d_model) fail("exqpe: width l must lie in [1, d_model]");
      if (!(q.theta1 >= 0.0)) fail("exqpe: theta1 must be non-negative");
      if (!(q.theta2 > 0.0)) fail("exqpe: theta2 must be positive");
      if (!(q.scale > 0.0)) fail("exqpe: scale must be positive");
      break;
    }
    case SchemeKind::rope: {
      const auto& r = std::get<RopeParams>(params);
      if (!(r.theta_base > 0.0)) fail("rope: theta_base must be positive");
      if (head_dim % 2 != 0) fail("rope: head_dim must be even");
      break;
    }
    case SchemeKind::sinusoidal:
      if (d_model % 2 != 0) fail("sinusoidal: d_model must be even");
      break;
    case SchemeKind::learned_absolute:
      if (std::get<LearnedAbsoluteParams>(params).max_len < 1) fail("learned_absolute: max_len must be positive");
      break;
  }
  const bool flags_set = ablation.stable_p || ablation.apply_once || ablation.learned != LearnedMode::off;
  if (flags_set && !is_override()) fail("ablation flags apply only to expe/exqpe");
  if (ablation.learned != LearnedMode::off && kind() != SchemeKind::expe) {
    fail("learned start/theta is only defined for expe");
  }
}

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::expe: return "expe";
    case SchemeKind::exqpe: return "exqpe";
    case SchemeKind::rope: return "rope";
    case SchemeKind::sinusoidal: return "sinusoidal";
    case SchemeKind::learned_absolute: return "learned_absolute";
  }
  return "unknown";
}

SchemeKind scheme_kind_from_string(const std::string& name) {
  for (auto k : {SchemeKind::expe, SchemeKind::exqpe, SchemeKind::rope, SchemeKind::sinusoidal,
                 SchemeKind::learned_absolute}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown encoding type '" + name + "'");
}

std::string to_string(LearnedMode mode) {
  switch (mode) {
    case LearnedMode::off: return "off";
    case LearnedMode::learned_random: return "learned_random";
    case LearnedMode::learned_initialized: return "learned_initialized";
  }
  return "unknown";
}

LearnedMode learned_mode_from_string(const std::string& name) {
  for (auto m : {LearnedMode::off, LearnedMode::learned_random, LearnedMode::learned_initialized}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown learned mode '" + name + "'");
}

std::vector<double> expe_position_vector(std::uint64_t n, const ExpeParams& p, bool stable_p) {
  std::vector<double> out(p.width);
  for (std::size_t j = 0; j < p.width; ++j) {
    const double index = static_cast<double>(stable_p ? n : n + j);
    out[j] = p.scale * (p.start + p.theta * index);
  }
  return out;
}

std::vector<double> exqpe_position_vector(std::uint64_t n, const ExqpeParams& p) {
  std::vector<double> out(p.width);
  const std::uint64_t l = p.width;
  for (std::uint64_t j = 0; j < l; ++j) {
    const std::uint64_t hits = j <= n ? (n - j) / l + 1 : 0;
    out[j] = p.scale * ((p.start + static_cast<double>(j) * p.theta1) +
                        p.theta2 * static_cast<double>(hits));
  }
  return out;
}

std::vector<double> override_position_vector(std::uint64_t n, const EncodingScheme& scheme) {
  switch (scheme.kind()) {
    case SchemeKind::expe:
      return expe_position_vector(n, std::get<ExpeParams>(scheme.params), scheme.ablation.stable_p);
    case SchemeKind::exqpe:
      return exqpe_position_vector(n, std::get<ExqpeParams>(scheme.params));
    default:
      throw UnsupportedSchemeError("override_position_vector: " + scheme.name() +
                                   " does not override dimensions");
  }
}

EncodingScheme scale_encoding(const EncodingScheme& scheme, double factor) {
  if (!(factor > 0.0)) throw ConfigError("scale_encoding: factor must be positive");
  EncodingScheme out = scheme;
  if (auto* e = std::get_if<ExpeParams>(&out.params)) {
    e->scale *= factor;
  } else if (auto* q = std::get_if<ExqpeParams>(&out.params)) {
    q->scale *= factor;
  } else {
    throw UnsupportedSchemeError("scale_encoding: " + scheme.name() +
                                 " has no position values to scale");
  }
  return out;
}

}  // namespace expe::pos
