#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace expe::pos {

// Overrides the first `width` dims of a token with the ramp
// p_j = scale * (start + theta * j) for j = n .. n + width - 1.
struct ExpeParams {
  double start = 0.0;
  double theta = 1.0 / 128.0;
  std::size_t width = 16;
  double scale = 1.0;
};

// Quantization-stable variant: slot j starts at start + j * theta1 and the
// slot (i mod width) gains theta2 at every position i = 0 .. n.
struct ExqpeParams {
  double start = 0.0;
  double theta1 = 1.0 / 128.0;
  double theta2 = 1.0 / 16.0;
  std::size_t width = 16;
  double scale = 1.0;
};

struct RopeParams {
  double theta_base = 10000.0;
};

struct SinusoidalParams {};

struct LearnedAbsoluteParams {
  std::size_t max_len = 64;
};

enum class LearnedMode { off, learned_random, learned_initialized };

struct AblationFlags {
  bool stable_p = false;    // override with p_n repeated
  bool apply_once = false;  // encode only in front of block 0
  LearnedMode learned = LearnedMode::off;
};

enum class SchemeKind { expe, exqpe, rope, sinusoidal, learned_absolute };

struct EncodingScheme {
  std::variant<ExpeParams, ExqpeParams, RopeParams, SinusoidalParams, LearnedAbsoluteParams> params =
      ExpeParams{};
  AblationFlags ablation{};

  SchemeKind kind() const { return static_cast<SchemeKind>(params.index()); }
  bool is_override() const { return kind() == SchemeKind::expe || kind() == SchemeKind::exqpe; }
  // Override width l for ExPE/ExQPE, 0 otherwise.
  std::size_t width() const;
  double scale() const;
  std::string name() const;

  // Throws ConfigError on any violated invariant; d_model and head_dim bound
  // the width and the rotary pairing.
  void validate(std::size_t d_model, std::size_t head_dim) const;
};

std::string to_string(SchemeKind kind);
SchemeKind scheme_kind_from_string(const std::string& name);
std::string to_string(LearnedMode mode);
LearnedMode learned_mode_from_string(const std::string& name);

// (p_n, ..., p_{n+l-1}); all entries equal p_n when stable_p is set.
std::vector<double> expe_position_vector(std::uint64_t n, const ExpeParams& p, bool stable_p = false);

// Closed form of the ExQPE recurrence:
//   slot j = scale * (start + j * theta1 + theta2 * #{i in [0, n] : i mod l == j})
std::vector<double> exqpe_position_vector(std::uint64_t n, const ExqpeParams& p);

// Position vector of an override scheme (ExPE honours ablation.stable_p).
std::vector<double> override_position_vector(std::uint64_t n, const EncodingScheme& scheme);

// Returns `scheme` with its emitted position values multiplied by `factor`.
// Only ExPE and ExQPE carry position values that can be scaled.
EncodingScheme scale_encoding(const EncodingScheme& scheme, double factor);

}  // namespace expe::pos
