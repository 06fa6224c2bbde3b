#include "expe/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "expe/numerics/eigen_view.hpp"

namespace expe::num {

namespace {

template <typename T>
Tensor<T> make_output(Shape shape, bool track) {
  return Tensor<T>(std::move(shape), track);
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.rank() != 2 || a.last_dim() != b.dim(0)) {
    throw DimensionError("matmul: inner dims differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const auto k = a.last_dim();
  const auto m = a.numel() / k;
  const auto n = b.dim(1);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  auto* tape = detail::recording_tape<T>({&a, &b});
  auto out = make_output<T>(out_shape, tape != nullptr);

  ConstMatView<T> A(a.data().data(), m, k);
  ConstMatView<T> B(b.data().data(), k, n);
  MatView<T> C(out.data().data(), m, n);
  C.noalias() = A * B;

  if (tape) {
    tape->record("matmul", {a, b}, out, [a, b, out, m, k, n]() {
      ConstMatView<T> dC(out.grad().data(), m, n);
      if (a.requires_grad()) {
        MatView<T> dA(a.grad().data(), m, k);
        dA.noalias() += dC * ConstMatView<T>(b.data().data(), k, n).transpose();
      }
      if (b.requires_grad()) {
        MatView<T> dB(b.grad().data(), k, n);
        dB.noalias() += ConstMatView<T>(a.data().data(), m, k).transpose() * dC;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> matmul_bt(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.rank() != 2 || a.last_dim() != b.dim(1)) {
    throw DimensionError("matmul_bt: inner dims differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
  }
  const auto k = a.last_dim();
  const auto m = a.numel() / k;
  const auto n = b.dim(0);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  auto* tape = detail::recording_tape<T>({&a, &b});
  auto out = make_output<T>(out_shape, tape != nullptr);

  ConstMatView<T> A(a.data().data(), m, k);
  ConstMatView<T> B(b.data().data(), n, k);
  MatView<T> C(out.data().data(), m, n);
  C.noalias() = A * B.transpose();

  if (tape) {
    tape->record("matmul_bt", {a, b}, out, [a, b, out, m, k, n]() {
      ConstMatView<T> dC(out.grad().data(), m, n);
      if (a.requires_grad()) {
        MatView<T> dA(a.grad().data(), m, k);
        dA.noalias() += dC * ConstMatView<T>(b.data().data(), n, k);
      }
      if (b.requires_grad()) {
        MatView<T> dB(b.grad().data(), n, k);
        dB.noalias() += dC.transpose() * ConstMatView<T>(a.data().data(), m, k);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  auto* tape = detail::recording_tape<T>({&a, &b});
  auto out = make_output<T>(a.shape(), tape != nullptr);
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  if (tape) {
    tape->record("add", {a, b}, out, [a, b, out]() {
      auto g = out.grad();
      for (const auto* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto dt = t->grad();
        for (std::size_t i = 0; i < g.size(); ++i) dt[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  auto* tape = detail::recording_tape<T>({&a, &b});
  auto out = make_output<T>(a.shape(), tape != nullptr);
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  if (tape) {
    tape->record("mul", {a, b}, out, [a, b, out]() {
      auto g = out.grad();
      auto x = a.data();
      auto y = b.data();
      if (a.requires_grad()) {
        auto da = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  auto* tape = detail::recording_tape<T>({&a});
  auto out = make_output<T>(a.shape(), tape != nullptr);
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * factor;
  if (tape) {
    tape->record("scale", {a}, out, [a, out, factor]() {
      auto g = out.grad();
      auto da = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  auto* tape = detail::recording_tape<T>({&a});
  auto out = make_output<T>({1}, tape != nullptr);
  T total{0};
  for (auto v : a.data()) total += v;
  out[0] = total;
  if (tape) {
    tape->record("sum", {a}, out, [a, out]() {
      const T g = out.grad()[0];
      for (auto& d : a.grad()) d += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  auto* tape = detail::recording_tape<T>({&a});
  auto out = make_output<T>(a.shape(), tape != nullptr);
  auto o = out.data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] / (T{1} + std::exp(-x[i]));
  if (tape) {
    tape->record("silu", {a}, out, [a, out]() {
      auto g = out.grad();
      auto x = a.data();
      auto da = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T s = T{1} / (T{1} + std::exp(-x[i]));
        da[i] += g[i] * s * (T{1} + x[i] * (T{1} - s));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x, const Tensor<T>& gain, T eps) {
  const auto d = x.last_dim();
  if (gain.numel() != d) {
    throw DimensionError("rms_norm: gain " + shape_str(gain.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
  }
  if (!(eps >= T{0})) throw ConfigError("rms_norm: eps must be non-negative");
  const auto rows = x.rows();
  auto* tape = detail::recording_tape<T>({&x, &gain});
  auto out = make_output<T>(x.shape(), tape != nullptr);
  std::vector<T> inv_rms(rows);
  auto xs = x.data();
  auto g = gain.data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xs.data() + r * d;
    T ms{0};
    for (std::size_t j = 0; j < d; ++j) ms += row[j] * row[j];
    ms /= static_cast<T>(d);
    const T inv = T{1} / std::sqrt(ms + eps);
    inv_rms[r] = inv;
    T* dst = o.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] = g[j] * row[j] * inv;
  }
  if (tape) {
    tape->record("rms_norm", {x, gain}, out,
                 [x, gain, out, inv_rms = std::move(inv_rms), rows, d]() {
                   auto dy = out.grad();
                   auto xs = x.data();
                   auto g = gain.data();
                   for (std::size_t r = 0; r < rows; ++r) {
                     const T* row = xs.data() + r * d;
                     const T* drow = dy.data() + r * d;
                     const T inv = inv_rms[r];
                     if (gain.requires_grad()) {
                       auto dg = gain.grad();
                       for (std::size_t j = 0; j < d; ++j) dg[j] += drow[j] * row[j] * inv;
                     }
                     if (x.requires_grad()) {
                       // dx = inv * (dxhat - xhat * mean(dxhat * xhat))
                       T dot{0};
                       for (std::size_t j = 0; j < d; ++j) dot += drow[j] * g[j] * row[j] * inv;
                       dot /= static_cast<T>(d);
                       T* dx = x.grad().data() + r * d;
                       for (std::size_t j = 0; j < d; ++j) {
                         dx[j] += inv * (drow[j] * g[j] - row[j] * inv * dot);
                       }
                     }
                   }
                 });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  const auto n = x.last_dim();
  const auto rows = x.rows();
  auto* tape = detail::recording_tape<T>({&x});
  auto out = make_output<T>(x.shape(), tape != nullptr);
  auto xs = x.data();
  auto o = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xs.data() + r * n;
    T* dst = o.data() + r * n;
    const T mx = *std::max_element(row, row + n);
    T total{0};
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(row[j] - mx);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  if (tape) {
    tape->record("softmax_rows", {x}, out, [x, out, rows, n]() {
      auto y = out.data();
      auto dy = out.grad();
      auto dx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t base = r * n;
        T dot{0};
        for (std::size_t j = 0; j < n; ++j) dot += dy[base + j] * y[base + j];
        for (std::size_t j = 0; j < n; ++j) dx[base + j] += y[base + j] * (dy[base + j] - dot);
      }
    });
  }
  return out;
}

namespace {

template <typename T>
void check_targets(std::size_t rows, std::size_t vocab, std::span<const TokenId> targets) {
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " rows");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const auto t = targets[r];
    if (t == kIgnoreIndex) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw IndexError("cross_entropy: target id " + std::to_string(t) + " at row " +
                       std::to_string(r) + " outside vocabulary of " + std::to_string(vocab));
    }
  }
}

template <typename T>
T row_logsumexp(const T* row, std::size_t n) {
  const T mx = *std::max_element(row, row + n);
  T total{0};
  for (std::size_t j = 0; j < n; ++j) total += std::exp(row[j] - mx);
  return mx + std::log(total);
}

}  // namespace

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const TokenId> targets) {
  const auto vocab = logits.last_dim();
  const auto rows = logits.rows();
  check_targets<T>(rows, vocab, targets);
  auto* tape = detail::recording_tape<T>({&logits});
  auto out = make_output<T>({1}, tape != nullptr);
  std::vector<T> lse(rows, T{0});
  std::size_t counted = 0;
  T total{0};
  auto xs = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == kIgnoreIndex) continue;
    const T* row = xs.data() + r * vocab;
    lse[r] = row_logsumexp(row, vocab);
    total += lse[r] - row[targets[r]];
    ++counted;
  }
  if (counted == 0) throw ContractError("cross_entropy: every target is ignored");
  out[0] = total / static_cast<T>(counted);
  if (tape) {
    std::vector<TokenId> tgt(targets.begin(), targets.end());
    tape->record("cross_entropy", {logits}, out,
                 [logits, out, lse = std::move(lse), tgt = std::move(tgt), rows, vocab, counted]() {
                   const T g = out.grad()[0] / static_cast<T>(counted);
                   auto xs = logits.data();
                   auto dx = logits.grad();
                   for (std::size_t r = 0; r < rows; ++r) {
                     if (tgt[r] == kIgnoreIndex) continue;
                     const std::size_t base = r * vocab;
                     for (std::size_t j = 0; j < vocab; ++j) {
                       dx[base + j] += g * std::exp(xs[base + j] - lse[r]);
                     }
                     dx[base + tgt[r]] -= g;
                   }
                 });
  }
  return out;
}

template <typename T>
std::vector<double> token_nll(const Tensor<T>& logits, std::span<const TokenId> targets) {
  const auto vocab = logits.last_dim();
  const auto rows = logits.rows();
  check_targets<T>(rows, vocab, targets);
  std::vector<double> nll(rows, 0.0);
  auto xs = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == kIgnoreIndex) continue;
    const T* row = xs.data() + r * vocab;
    nll[r] = static_cast<double>(row_logsumexp(row, vocab) - row[targets[r]]);
  }
  return nll;
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const TokenId> ids, const Shape& out_shape) {
  if (table.rank() != 2) throw DimensionError("embedding: table must be 2-D, got " + shape_str(table.shape()));
  if (shape_numel(out_shape) != ids.size()) {
    throw DimensionError("embedding: " + std::to_string(ids.size()) + " ids do not fill " +
                         shape_str(out_shape));
  }
  const auto vocab = table.dim(0);
  const auto d = table.dim(1);
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("embedding: id " + std::to_string(id) + " outside table of " +
                       std::to_string(vocab) + " rows");
    }
  }
  Shape shape = out_shape;
  shape.push_back(d);
  auto* tape = detail::recording_tape<T>({&table});
  auto out = make_output<T>(shape, tape != nullptr);
  auto src = table.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(src.data() + static_cast<std::size_t>(ids[i]) * d, d, dst.data() + i * d);
  }
  if (tape) {
    std::vector<TokenId> idv(ids.begin(), ids.end());
    tape->record("embedding", {table}, out, [table, out, idv = std::move(idv), d]() {
      auto g = out.grad();
      auto dt = table.grad();
      for (std::size_t i = 0; i < idv.size(); ++i) {
        T* row = dt.data() + static_cast<std::size_t>(idv[i]) * d;
        const T* grow = g.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += grow[j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout: rate must be below 1");
  auto* tape = detail::recording_tape<T>({&x});
  auto out = make_output<T>(x.shape(), tape != nullptr);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < p ? T{0} : keep_scale;
  auto xs = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xs[i] * mask[i];
  if (tape) {
    tape->record("dropout", {x}, out, [x, out, mask = std::move(mask)]() {
      auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * mask[i];
    });
  }
  return out;
}

#define EXPE_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> matmul_bt(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> silu(const Tensor<T>&);                                                 \
  template Tensor<T> rms_norm(const Tensor<T>&, const Tensor<T>&, T);                        \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                         \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const TokenId>);              \
  template std::vector<double> token_nll(const Tensor<T>&, std::span<const TokenId>);        \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const TokenId>, const Shape&);    \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);

EXPE_INSTANTIATE_OPS(float)
EXPE_INSTANTIATE_OPS(double)

}  // namespace expe::num
