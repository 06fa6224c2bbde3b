#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. None of them share code with the library.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <utility>
#include <vector>

namespace oracle {

// Unrolls p_n = p_{n-1} + theta2 * e_{n mod l} from the base ramp
// (start + j * theta1), applying the increment for every position 0..n.
inline std::vector<double> exqpe_recurrence(std::uint64_t n, double start, double theta1, double theta2,
                                            std::size_t l, double scale = 1.0) {
  std::vector<double> v(l);
  for (std::size_t j = 0; j < l; ++j) v[j] = start + static_cast<double>(j) * theta1;
  for (std::uint64_t i = 0; i <= n; ++i) v[i % l] += theta2;
  for (auto& x : v) x *= scale;
  return v;
}

// Round a float to bfloat16 (nearest, ties to even) with the usual bit trick,
// returned as the float it represents. NaN is not handled.
inline float bf16_round(float x) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7fffu + lsb;
  bits &= 0xffff0000u;
  return std::bit_cast<float>(bits);
}

// Causal softmax attention for one head, one query at a time.
// q, k, v: [seq x dim] row-major. Returns [seq x dim].
inline std::vector<double> causal_attention(const std::vector<double>& q, const std::vector<double>& k,
                                            const std::vector<double>& v, std::size_t seq, std::size_t dim) {
  std::vector<double> out(seq * dim, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < seq; ++i) {
    std::vector<double> s(i + 1);
    double mx = -1e300;
    for (std::size_t j = 0; j <= i; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < dim; ++c) dot += q[i * dim + c] * k[j * dim + c];
      s[j] = dot * scale;
      mx = std::max(mx, s[j]);
    }
    double z = 0;
    for (auto& e : s) z += (e = std::exp(e - mx));
    for (std::size_t j = 0; j <= i; ++j) {
      for (std::size_t c = 0; c < dim; ++c) out[i * dim + c] += s[j] / z * v[j * dim + c];
    }
  }
  return out;
}

// Rotates consecutive pairs of x (length dim) to position m.
inline std::vector<double> rope_rotate(const std::vector<double>& x, double m, double base) {
  std::vector<double> out(x.size());
  const auto dim = x.size();
  for (std::size_t t = 0; t < dim / 2; ++t) {
    const double freq = std::pow(base, -2.0 * static_cast<double>(t) / static_cast<double>(dim));
    const double c = std::cos(m * freq), s = std::sin(m * freq);
    out[2 * t] = x[2 * t] * c - x[2 * t + 1] * s;
    out[2 * t + 1] = x[2 * t] * s + x[2 * t + 1] * c;
  }
  return out;
}

// First n < max_len - 1 whose bf16-rounded vector equals that of n + 1,
// found by rounding every slot of every position.
template <typename F>
std::optional<std::uint64_t> bf16_first_collision(F vec, std::uint64_t max_len) {
  auto round_all = [](const std::vector<double>& v) {
    std::vector<float> out;
    for (auto x : v) out.push_back(bf16_round(static_cast<float>(x)));
    return out;
  };
  auto prev = round_all(vec(0));
  for (std::uint64_t n = 0; n + 1 < max_len; ++n) {
    auto next = round_all(vec(n + 1));
    if (next == prev) return n;
    prev = std::move(next);
  }
  return std::nullopt;
}

}  // namespace oracle
