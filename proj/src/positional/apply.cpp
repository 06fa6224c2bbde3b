#include "expe/positional/apply.hpp"

#include <algorithm>
#include <cmath>

#include "expe/error.hpp"
#include "expe/numerics/tape.hpp"

namespace expe::pos {

namespace {

std::size_t seq_len_of(const num::Shape& shape, const char* op) {
  if (shape.size() < 2) throw DimensionError(std::string(op) + ": need [..., seq, d], got " + num::shape_str(shape));
  return shape[shape.size() - 2];
}

}  // namespace

template <typename T>
Tensor<T> override_table(const EncodingScheme& scheme, std::size_t rows, std::uint64_t offset) {
  const auto width = scheme.width();
  if (width == 0) {
    throw UnsupportedSchemeError("override_table: " + scheme.name() + " does not override dimensions");
  }
  std::vector<T> values(rows * width);
  for (std::size_t t = 0; t < rows; ++t) {
    const auto vec = override_position_vector(offset + t, scheme);
    std::transform(vec.begin(), vec.end(), values.begin() + t * width,
                   [](double v) { return static_cast<T>(v); });
  }
  return Tensor<T>({rows, width}, std::move(values));
}

template <typename T>
Tensor<T> override_prefix(const Tensor<T>& x, const Tensor<T>& table) {
  const auto seq = seq_len_of(x.shape(), "override_prefix");
  const auto d = x.last_dim();
  if (table.rank() != 2 || table.dim(0) != seq) {
    throw DimensionError("override_prefix: table " + num::shape_str(table.shape()) +
                         " does not match sequence of " + num::shape_str(x.shape()));
  }
  const auto width = table.dim(1);
  if (width > d) {
    throw ConfigError("override width l=" + std::to_string(width) + " exceeds d=" + std::to_string(d));
  }
  auto* tape = num::detail::recording_tape<T>({&x, &table});
  Tensor<T> out(x.shape(), tape != nullptr);
  auto src = x.data();
  auto dst = out.data();
  auto tab = table.data();
  std::copy(src.begin(), src.end(), dst.begin());
  const auto rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(tab.data() + (r % seq) * width, width, dst.data() + r * d);
  }
  if (tape) {
    tape->record("override_prefix", {x, table}, out, [x, table, out, rows, seq, d, width]() {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto dx = x.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = width; j < d; ++j) dx[r * d + j] += g[r * d + j];
        }
      }
      if (table.requires_grad()) {
        auto dt = table.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < width; ++j) dt[(r % seq) * width + j] += g[r * d + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> expe_apply(const Tensor<T>& x, const ExpeParams& p, std::uint64_t offset, bool stable_p) {
  if (p.width < 1) throw ConfigError("expe_apply: width l must be at least 1");
  if (p.width > x.last_dim()) {
    throw ConfigError("expe_apply: width l=" + std::to_string(p.width) + " exceeds d=" +
                      std::to_string(x.last_dim()));
  }
  EncodingScheme scheme{p, {}};
  scheme.ablation.stable_p = stable_p;
  const auto seq = seq_len_of(x.shape(), "expe_apply");
  return override_prefix(x, override_table<T>(scheme, seq, offset));
}

template <typename T>
Tensor<T> exqpe_apply(const Tensor<T>& x, const ExqpeParams& p, std::uint64_t offset) {
  if (p.width < 1) throw ConfigError("exqpe_apply: width l must be at least 1");
  if (p.width > x.last_dim()) {
    throw ConfigError("exqpe_apply: width l=" + std::to_string(p.width) + " exceeds d=" +
                      std::to_string(x.last_dim()));
  }
  const auto seq = seq_len_of(x.shape(), "exqpe_apply");
  return override_prefix(x, override_table<T>(EncodingScheme{p, {}}, seq, offset));
}

template <typename T>
LearnedScalars<T> learned_scalar_params(LearnedMode mode, const ExpeParams& p, double init_std,
                                        num::Rng& rng) {
  switch (mode) {
    case LearnedMode::learned_initialized:
      return {Tensor<T>::scalar(static_cast<T>(p.start), true), Tensor<T>::scalar(static_cast<T>(p.theta), true)};
    case LearnedMode::learned_random:
      return {num::gaussian_init<T>({1}, init_std, rng, true), num::gaussian_init<T>({1}, init_std, rng, true)};
    case LearnedMode::off:
      break;
  }
  throw ConfigError("learned_scalar_params: mode is off");
}

template <typename T>
Tensor<T> learned_expe_table(const LearnedScalars<T>& scalars, double scale, std::size_t width,
                             std::size_t rows, std::uint64_t offset, bool stable_p) {
  auto* tape = num::detail::recording_tape<T>({&scalars.start, &scalars.theta});
  Tensor<T> out({rows, width}, tape != nullptr);
  const T start = scalars.start.item();
  const T theta = scalars.theta.item();
  const T s = static_cast<T>(scale);
  auto o = out.data();
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t j = 0; j < width; ++j) {
      const auto k = static_cast<T>(offset + t + (stable_p ? 0 : j));
      o[t * width + j] = s * (start + theta * k);
    }
  }
  if (tape) {
    const auto start_t = scalars.start;
    const auto theta_t = scalars.theta;
    tape->record("learned_expe_table", {start_t, theta_t}, out,
                 [start_t, theta_t, out, s, rows, width, offset, stable_p]() {
                   auto g = out.grad();
                   T d_start{0};
                   T d_theta{0};
                   for (std::size_t t = 0; t < rows; ++t) {
                     for (std::size_t j = 0; j < width; ++j) {
                       const auto k = static_cast<T>(offset + t + (stable_p ? 0 : j));
                       d_start += g[t * width + j];
                       d_theta += g[t * width + j] * k;
                     }
                   }
                   if (start_t.requires_grad()) start_t.grad()[0] += s * d_start;
                   if (theta_t.requires_grad()) theta_t.grad()[0] += s * d_theta;
                 });
  }
  return out;
}

template <typename T>
Tensor<T> sinusoidal_table(std::size_t max_len, std::size_t d) {
  if (d % 2 != 0) throw ConfigError("sinusoidal_table: d must be even, got " + std::to_string(d));
  std::vector<T> values(max_len * d);
  for (std::size_t i = 0; i < max_len; ++i) {
    for (std::size_t t = 0; t < d / 2; ++t) {
      const double angle =
          static_cast<double>(i) / std::pow(10000.0, static_cast<double>(2 * t) / static_cast<double>(d));
      values[i * d + 2 * t] = static_cast<T>(std::sin(angle));
      values[i * d + 2 * t + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return Tensor<T>({max_len, d}, std::move(values));
}

template <typename T>
Tensor<T> additive_apply(const Tensor<T>& x, const Tensor<T>& table, std::uint64_t offset) {
  const auto seq = seq_len_of(x.shape(), "additive_apply");
  const auto d = x.last_dim();
  if (table.rank() != 2 || table.dim(1) != d) {
    throw DimensionError("additive_apply: table " + num::shape_str(table.shape()) +
                         " does not match width of " + num::shape_str(x.shape()));
  }
  if (offset + seq > table.dim(0)) {
    throw LengthExceededError("additive_apply: positions up to " + std::to_string(offset + seq) +
                              " requested but the table holds " + std::to_string(table.dim(0)));
  }
  auto* tape = num::detail::recording_tape<T>({&x, &table});
  Tensor<T> out(x.shape(), tape != nullptr);
  auto src = x.data();
  auto tab = table.data();
  auto dst = out.data();
  const auto rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* trow = tab.data() + (offset + r % seq) * d;
    for (std::size_t j = 0; j < d; ++j) dst[r * d + j] = src[r * d + j] + trow[j];
  }
  if (tape) {
    tape->record("additive_apply", {x, table}, out, [x, table, out, rows, seq, d, offset]() {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto dx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      }
      if (table.requires_grad()) {
        auto dt = table.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          T* trow = dt.data() + (offset + r % seq) * d;
          for (std::size_t j = 0; j < d; ++j) trow[j] += g[r * d + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> rope_apply(const Tensor<T>& x, const RopeParams& p, std::uint64_t offset) {
  if (x.rank() < 3) {
    throw DimensionError("rope_apply: need [..., seq, heads, head_dim], got " + num::shape_str(x.shape()));
  }
  const auto head_dim = x.dim(x.rank() - 1);
  const auto heads = x.dim(x.rank() - 2);
  const auto seq = x.dim(x.rank() - 3);
  if (head_dim % 2 != 0) throw ConfigError("rope_apply: head_dim must be even, got " + std::to_string(head_dim));
  const auto half = head_dim / 2;
  std::vector<T> cos_table(seq * half);
  std::vector<T> sin_table(seq * half);
  for (std::size_t n = 0; n < seq; ++n) {
    for (std::size_t t = 0; t < half; ++t) {
      const double freq = std::pow(p.theta_base, -static_cast<double>(2 * t) / static_cast<double>(head_dim));
      const double angle = static_cast<double>(offset + n) * freq;
      cos_table[n * half + t] = static_cast<T>(std::cos(angle));
      sin_table[n * half + t] = static_cast<T>(std::sin(angle));
    }
  }
  auto* tape = num::detail::recording_tape<T>({&x});
  Tensor<T> out(x.shape(), tape != nullptr);
  auto src = x.data();
  auto dst = out.data();
  const auto token_width = heads * head_dim;
  const auto tokens = x.numel() / token_width;
  for (std::size_t r = 0; r < tokens; ++r) {
    const auto n = r % seq;
    for (std::size_t h = 0; h < heads; ++h) {
      const auto base = r * token_width + h * head_dim;
      for (std::size_t t = 0; t < half; ++t) {
        const T c = cos_table[n * half + t];
        const T s = sin_table[n * half + t];
        const T a = src[base + 2 * t];
        const T b = src[base + 2 * t + 1];
        dst[base + 2 * t] = a * c - b * s;
        dst[base + 2 * t + 1] = a * s + b * c;
      }
    }
  }
  if (tape) {
    tape->record("rope_apply", {x}, out,
                 [x, out, cos_table = std::move(cos_table), sin_table = std::move(sin_table), tokens, seq,
                  heads, head_dim, half, token_width]() {
                   auto g = out.grad();
                   auto dx = x.grad();
                   for (std::size_t r = 0; r < tokens; ++r) {
                     const auto n = r % seq;
                     for (std::size_t h = 0; h < heads; ++h) {
                       const auto base = r * token_width + h * head_dim;
                       for (std::size_t t = 0; t < half; ++t) {
                         const T c = cos_table[n * half + t];
                         const T s = sin_table[n * half + t];
                         const T ga = g[base + 2 * t];
                         const T gb = g[base + 2 * t + 1];
                         dx[base + 2 * t] += ga * c + gb * s;
                         dx[base + 2 * t + 1] += -ga * s + gb * c;
                       }
                     }
                   }
                 });
  }
  return out;
}

#define EXPE_INSTANTIATE_POSITIONAL(T)                                                              \
  template Tensor<T> override_table<T>(const EncodingScheme&, std::size_t, std::uint64_t);          \
  template Tensor<T> override_prefix(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> expe_apply(const Tensor<T>&, const ExpeParams&, std::uint64_t, bool);          \
  template Tensor<T> exqpe_apply(const Tensor<T>&, const ExqpeParams&, std::uint64_t);              \
  template LearnedScalars<T> learned_scalar_params<T>(LearnedMode, const ExpeParams&, double,       \
                                                      num::Rng&);                                   \
  template Tensor<T> learned_expe_table(const LearnedScalars<T>&, double, std::size_t, std::size_t, \
                                        std::uint64_t, bool);                                       \
  template Tensor<T> sinusoidal_table<T>(std::size_t, std::size_t);                                 \
  template Tensor<T> additive_apply(const Tensor<T>&, const Tensor<T>&, std::uint64_t);             \
  template Tensor<T> rope_apply(const Tensor<T>&, const RopeParams&, std::uint64_t);

EXPE_INSTANTIATE_POSITIONAL(float)
EXPE_INSTANTIATE_POSITIONAL(double)

}  // namespace expe::pos
