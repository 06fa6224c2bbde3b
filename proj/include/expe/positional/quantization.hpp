#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "expe/positional/encoding.hpp"

namespace expe::pos {

// Binary floating-point format with IEEE-style layout: implicit leading bit,
// exponent bias 2^(exponent_bits-1) - 1, gradual underflow, overflow to inf.
struct FloatFormat {
  int exponent_bits = 8;
  int mantissa_bits = 7;

  void validate() const;
  static FloatFormat bf16() { return {8, 7}; }
  static FloatFormat fp16() { return {5, 10}; }
  static FloatFormat tf32() { return {8, 10}; }
  static FloatFormat fp32() { return {8, 23}; }
  static FloatFormat fp64() { return {11, 52}; }
  // Accepts bf16 / bf16-sim / fp16 / tf32 / fp32 / fp64.
  static FloatFormat from_name(const std::string& name);
};

// Rounds x to the nearest value representable in `fmt`, ties to even.
double round_to_format(double x, const FloatFormat& fmt);

struct CollisionReport {
  std::string scheme;
  FloatFormat format;
  // Smallest n whose rounded position vector equals that of n + 1.
  std::optional<std::uint64_t> first_collision;
  // Number of adjacent pairs (n, n + 1), n + 1 < max_len, that collide.
  std::uint64_t collision_count = 0;
  std::uint64_t max_len = 0;
};

nlohmann::json to_json(const CollisionReport& report);

// Position vector fed to the collision analysis. Override schemes emit their
// override vector; sinusoidal emits its table row (width d_model); RoPE emits
// the (cos, sin) pairs of its rotation angles for head_dim = d_model.
std::vector<double> analysis_vector(std::uint64_t n, const EncodingScheme& scheme, std::size_t d_model);

CollisionReport quantization_sensitivity(const EncodingScheme& scheme, std::uint64_t max_len,
                                         const FloatFormat& fmt, std::size_t d_model = 0);

}  // namespace expe::pos
