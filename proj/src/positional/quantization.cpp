#include "expe/positional/quantization.hpp"

#include <cmath>
#include <limits>

#include "expe/error.hpp"

namespace expe::pos {

void FloatFormat::validate() const {
  if (mantissa_bits < 1) throw ConfigError("float format: mantissa_bits must be at least 1");
  if (mantissa_bits > 52) throw ConfigError("float format: mantissa_bits above 52 cannot be simulated");
  if (exponent_bits < 2 || exponent_bits > 11) {
    throw ConfigError("float format: exponent_bits must lie in [2, 11]");
  }
}

FloatFormat FloatFormat::from_name(const std::string& name) {
  if (name == "bf16" || name == "bf16-sim") return bf16();
  if (name == "fp16") return fp16();
  if (name == "tf32") return tf32();
  if (name == "fp32") return fp32();
  if (name == "fp64") return fp64();
  throw ConfigError("unknown float format '" + name + "'");
}

double round_to_format(double x, const FloatFormat& fmt) {
  fmt.validate();
  if (x == 0.0 || !std::isfinite(x)) return x;
  const int bias = (1 << (fmt.exponent_bits - 1)) - 1;
  const int min_exp = 1 - bias;
  int exp2 = 0;
  std::frexp(x, &exp2);  // x = f * 2^exp2, |f| in [0.5, 1)
  const int unbiased = std::max(exp2 - 1, min_exp);
  const int quantum_exp = unbiased - fmt.mantissa_bits;
  // Scaling by a power of two is exact; nearbyint honours the default
  // round-half-to-even mode.
  const double rounded = std::ldexp(std::nearbyint(std::ldexp(x, -quantum_exp)), quantum_exp);
  const double max_finite = std::ldexp(2.0 - std::ldexp(1.0, -fmt.mantissa_bits), bias);
  if (std::abs(rounded) > max_finite) return std::copysign(std::numeric_limits<double>::infinity(), x);
  return rounded;
}

nlohmann::json to_json(const CollisionReport& report) {
  nlohmann::json j;
  j["scheme"] = report.scheme;
  j["format"] = {{"exp_bits", report.format.exponent_bits}, {"man_bits", report.format.mantissa_bits}};
  j["first_collision"] = report.first_collision ? nlohmann::json(*report.first_collision) : nlohmann::json(nullptr);
  j["collision_count"] = report.collision_count;
  j["max_len"] = report.max_len;
  return j;
}

std::vector<double> analysis_vector(std::uint64_t n, const EncodingScheme& scheme, std::size_t d_model) {
  switch (scheme.kind()) {
    case SchemeKind::expe:
    case SchemeKind::exqpe:
      return override_position_vector(n, scheme);
    case SchemeKind::sinusoidal: {
      if (d_model == 0 || d_model % 2 != 0) throw ConfigError("sinusoidal analysis needs an even d_model");
      std::vector<double> out(d_model);
      for (std::size_t t = 0; t < d_model / 2; ++t) {
        const double angle = static_cast<double>(n) /
                             std::pow(10000.0, static_cast<double>(2 * t) / static_cast<double>(d_model));
        out[2 * t] = std::sin(angle);
        out[2 * t + 1] = std::cos(angle);
      }
      return out;
    }
    case SchemeKind::rope: {
      if (d_model == 0 || d_model % 2 != 0) throw ConfigError("rope analysis needs an even head_dim");
      const double base = std::get<RopeParams>(scheme.params).theta_base;
      std::vector<double> out(d_model);
      for (std::size_t t = 0; t < d_model / 2; ++t) {
        const double angle =
            static_cast<double>(n) * std::pow(base, -static_cast<double>(2 * t) / static_cast<double>(d_model));
        out[2 * t] = std::cos(angle);
        out[2 * t + 1] = std::sin(angle);
      }
      return out;
    }
    case SchemeKind::learned_absolute:
      break;
  }
  throw UnsupportedSchemeError("quantization analysis: " + scheme.name() + " has no closed-form positions");
}

CollisionReport quantization_sensitivity(const EncodingScheme& scheme, std::uint64_t max_len,
                                         const FloatFormat& fmt, std::size_t d_model) {
  fmt.validate();
  if (max_len < 2) throw ConfigError("quantization_sensitivity: max_len must be at least 2");
  CollisionReport report;
  report.scheme = scheme.name();
  report.format = fmt;
  report.max_len = max_len;
  auto rounded = [&](std::uint64_t n) {
    auto v = analysis_vector(n, scheme, d_model);
    for (auto& x : v) x = round_to_format(x, fmt);
    return v;
  };
  auto previous = rounded(0);
  for (std::uint64_t n = 1; n < max_len; ++n) {
    auto current = rounded(n);
    if (current == previous) {
      ++report.collision_count;
      if (!report.first_collision) report.first_collision = n - 1;
    }
    previous = std::move(current);
  }
  return report;
}

}  // namespace expe::pos
