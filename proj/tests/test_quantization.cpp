#include <doctest.h>

#include <cmath>
#include <limits>

#include "expe/error.hpp"
#include "expe/numerics/rng.hpp"
#include "expe/positional/quantization.hpp"
#include "oracles.hpp"

using namespace expe;
using namespace expe::pos;

TEST_SUITE("quantization") {

TEST_CASE("bf16 rounding matches the bit-trick oracle") {
  num::Rng rng(1);
  const auto fmt = FloatFormat::bf16();
  for (int i = 0; i < 200000; ++i) {
    const auto bits = static_cast<std::uint32_t>(rng.next_u64());
    const float x = std::bit_cast<float>(bits);
    if (!std::isfinite(x)) continue;
    const float ref = oracle::bf16_round(x);
    const double got = round_to_format(x, fmt);
    if (std::isinf(ref)) {
      REQUIRE(std::isinf(got));
      REQUIRE(std::signbit(got) == std::signbit(ref));
    } else {
      REQUIRE(got == static_cast<double>(ref));
    }
  }
  for (float x : {1.0f, 1.00390625f, 1.01171875f, 256.5f, 3.0e-39f, -7.5e-41f}) {
    CHECK(round_to_format(x, fmt) == static_cast<double>(oracle::bf16_round(x)));
  }
}

TEST_CASE("ties go to even") {
  const auto fmt = FloatFormat::bf16();
  // 1 + 2^-8 is halfway between 1 and 1 + 2^-7.
  CHECK(round_to_format(1.0 + std::ldexp(1.0, -8), fmt) == 1.0);
  CHECK(round_to_format(1.0 + 3 * std::ldexp(1.0, -8), fmt) == 1.0 + std::ldexp(1.0, -6));
}

TEST_CASE("fp16 limits") {
  const auto fmt = FloatFormat::fp16();
  CHECK(round_to_format(65504.0, fmt) == 65504.0);
  CHECK(std::isinf(round_to_format(65520.0, fmt)));
  CHECK(round_to_format(std::ldexp(1.0, -24), fmt) == std::ldexp(1.0, -24));
  CHECK(round_to_format(std::ldexp(1.0, -26), fmt) == 0.0);
  CHECK(round_to_format(2049.0, fmt) == 2048.0);
  CHECK(round_to_format(0.0, fmt) == 0.0);
  CHECK(round_to_format(1.0, FloatFormat::fp64()) == 1.0);
}

TEST_CASE("format names and validation") {
  CHECK(FloatFormat::from_name("bf16-sim").mantissa_bits == 7);
  CHECK(FloatFormat::from_name("fp16").exponent_bits == 5);
  CHECK_THROWS_AS(FloatFormat::from_name("fp8"), ConfigError);
  CHECK_THROWS_AS((FloatFormat{8, 0}.validate()), ConfigError);
}

TEST_CASE("collision analysis agrees with the oracle and favours ExQPE") {
  EncodingScheme expe;
  expe.params = ExpeParams{0.0, 1.0 / 2048, 16, 1.0};
  EncodingScheme exqpe;
  exqpe.params = ExqpeParams{0.0, 1.0 / 2048, 1.0 / 16, 16, 1.0};
  const auto a = quantization_sensitivity(expe, 16384, FloatFormat::bf16());
  const auto b = quantization_sensitivity(exqpe, 16384, FloatFormat::bf16());
  const auto oa = oracle::bf16_first_collision(
      [&](std::uint64_t n) { return expe_position_vector(n, std::get<ExpeParams>(expe.params)); }, 16384);
  const auto ob = oracle::bf16_first_collision(
      [&](std::uint64_t n) { return exqpe_position_vector(n, std::get<ExqpeParams>(exqpe.params)); }, 16384);
  CHECK(a.first_collision == oa);
  CHECK(b.first_collision == ob);
  REQUIRE(a.first_collision);
  CHECK((!b.first_collision || *b.first_collision > *a.first_collision));
  CHECK(a.collision_count > b.collision_count);

  const auto j = to_json(a);
  CHECK(j["format"]["man_bits"] == 7);
  CHECK(j["max_len"] == 16384);
}

TEST_CASE("no collisions in fp64 for short ranges") {
  EncodingScheme expe;
  expe.params = ExpeParams{0.0, 1.0 / 128, 4, 1.0};
  const auto r = quantization_sensitivity(expe, 1000, FloatFormat::fp64());
  CHECK_FALSE(r.first_collision);
  CHECK(r.collision_count == 0);
  CHECK(to_json(r)["first_collision"].is_null());
}

TEST_CASE("learned absolute has nothing to analyse") {
  EncodingScheme e;
  e.params = LearnedAbsoluteParams{};
  CHECK_THROWS_AS(quantization_sensitivity(e, 100, FloatFormat::bf16()), UnsupportedSchemeError);
}

}
