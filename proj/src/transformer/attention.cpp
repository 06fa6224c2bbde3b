#include "expe/transformer/attention.hpp"

#include <cmath>
#include <limits>

#include "expe/error.hpp"
#include "expe/numerics/eigen_view.hpp"
#include "expe/numerics/tape.hpp"

namespace expe::nn {

using num::ConstStridedView;
using num::RowMatrix;
using num::StridedView;

AttentionMask::AttentionMask(std::size_t seq, std::vector<std::uint8_t> allowed)
    : seq_(seq), allowed_(std::move(allowed)) {
  if (allowed_.size() != seq_ * seq_) throw DimensionError("attention mask must be seq x seq");
}

std::size_t AttentionMask::allowed_count() const {
  std::size_t n = 0;
  for (auto a : allowed_) n += a != 0;
  return n;
}

AttentionMask causal_mask(std::size_t seq) {
  if (seq < 1) throw ContractError("causal_mask: seq must be at least 1");
  std::vector<std::uint8_t> allowed(seq * seq, 0);
  for (std::size_t i = 0; i < seq; ++i) {
    for (std::size_t j = 0; j <= i; ++j) allowed[i * seq + j] = 1;
  }
  return AttentionMask(seq, std::move(allowed));
}

namespace {

struct Geometry {
  std::size_t batch;
  std::size_t seq;
  std::size_t heads;
  std::size_t head_dim;
  std::size_t row_stride() const { return heads * head_dim; }
  std::size_t offset(std::size_t b, std::size_t h) const { return b * seq * row_stride() + h * head_dim; }
};

template <typename T>
Geometry geometry_of(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>* v) {
  if (q.rank() < 3) {
    throw DimensionError("attention: need [..., seq, heads, head_dim], got " + num::shape_str(q.shape()));
  }
  if (q.shape() != k.shape() || (v && v->shape() != q.shape())) {
    throw DimensionError("attention: q/k/v shapes differ, " + num::shape_str(q.shape()) + " vs " +
                         num::shape_str(k.shape()));
  }
  Geometry g;
  g.head_dim = q.dim(q.rank() - 1);
  g.heads = q.dim(q.rank() - 2);
  g.seq = q.dim(q.rank() - 3);
  g.batch = q.numel() / (g.seq * g.heads * g.head_dim);
  return g;
}

template <typename T>
void masked_softmax(RowMatrix<T>& scores, const AttentionMask& mask) {
  const auto seq = static_cast<std::size_t>(scores.rows());
  for (std::size_t i = 0; i < seq; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    bool nan = false;
    for (std::size_t j = 0; j < seq; ++j) {
      if (!mask.allowed(i, j)) {
        scores(i, j) = -std::numeric_limits<T>::infinity();
      } else if (std::isnan(scores(i, j))) {
        nan = true;
      } else if (scores(i, j) > mx) {
        mx = scores(i, j);
      }
    }
    if (nan) {
      scores.row(i).setConstant(std::numeric_limits<T>::quiet_NaN());
      continue;
    }
    if (mx == -std::numeric_limits<T>::infinity()) {
      scores.row(i).setZero();
      continue;
    }
    T total{0};
    for (std::size_t j = 0; j < seq; ++j) {
      const T e = mask.allowed(i, j) ? std::exp(scores(i, j) - mx) : T{0};
      scores(i, j) = e;
      total += e;
    }
    scores.row(i) /= total;
  }
}

}  // namespace

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const AttentionMask& mask,
                    double dropout, bool training, num::Rng* rng) {
  const auto g = geometry_of(q, k, &v);
  if (mask.seq() != g.seq) throw DimensionError("attention: mask does not match sequence length");
  const bool use_dropout = training && dropout > 0.0;
  if (use_dropout && !rng) throw ContractError("attention: dropout needs an rng");
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(g.head_dim)));
  auto* tape = num::detail::recording_tape<T>({&q, &k, &v});
  Tensor<T> out(q.shape(), tape != nullptr);

  const std::size_t block = g.seq * g.seq;
  const std::size_t n_blocks = g.batch * g.heads;
  std::vector<T> probs(tape ? n_blocks * block : 0);
  std::vector<T> keep(tape && use_dropout ? n_blocks * block : 0);
  const T keep_scale = use_dropout ? static_cast<T>(1.0 / (1.0 - dropout)) : T{1};
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(g.row_stride()));
  const auto rows = static_cast<Eigen::Index>(g.seq);
  const auto cols = static_cast<Eigen::Index>(g.head_dim);

  RowMatrix<T> p(rows, rows);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t h = 0; h < g.heads; ++h) {
      const auto off = g.offset(b, h);
      ConstStridedView<T> Q(q.data().data() + off, rows, cols, stride);
      ConstStridedView<T> K(k.data().data() + off, rows, cols, stride);
      ConstStridedView<T> V(v.data().data() + off, rows, cols, stride);
      StridedView<T> O(out.data().data() + off, rows, cols, stride);
      p.noalias() = (Q * K.transpose()) * scale;
      masked_softmax(p, mask);
      const std::size_t idx = b * g.heads + h;
      if (tape) std::copy_n(p.data(), block, probs.data() + idx * block);
      if (use_dropout) {
        for (std::size_t e = 0; e < block; ++e) {
          const T m = rng->uniform() < dropout ? T{0} : keep_scale;
          p.data()[e] *= m;
          if (tape) keep[idx * block + e] = m;
        }
      }
      O.noalias() = p * V;
    }
  }

  if (tape) {
    tape->record("attention", {q, k, v}, out,
                 [q, k, v, out, g, scale, probs = std::move(probs), keep = std::move(keep), block]() {
                   const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(g.row_stride()));
                   const auto rows = static_cast<Eigen::Index>(g.seq);
                   const auto cols = static_cast<Eigen::Index>(g.head_dim);
                   RowMatrix<T> dp(rows, rows);
                   RowMatrix<T> pd(rows, rows);
                   for (std::size_t b = 0; b < g.batch; ++b) {
                     for (std::size_t h = 0; h < g.heads; ++h) {
                       const auto off = g.offset(b, h);
                       const std::size_t idx = b * g.heads + h;
                       Eigen::Map<const RowMatrix<T>> P(probs.data() + idx * block, rows, rows);
                       ConstStridedView<T> Q(q.data().data() + off, rows, cols, stride);
                       ConstStridedView<T> K(k.data().data() + off, rows, cols, stride);
                       ConstStridedView<T> V(v.data().data() + off, rows, cols, stride);
                       ConstStridedView<T> dO(out.grad().data() + off, rows, cols, stride);
                       // Weights actually used in the forward product.
                       if (keep.empty()) {
                         pd = P;
                       } else {
                         Eigen::Map<const RowMatrix<T>> M(keep.data() + idx * block, rows, rows);
                         pd = P.cwiseProduct(M);
                       }
                       if (v.requires_grad()) {
                         StridedView<T> dV(v.grad().data() + off, rows, cols, stride);
                         dV.noalias() += pd.transpose() * dO;
                       }
                       if (!q.requires_grad() && !k.requires_grad()) continue;
                       dp.noalias() = dO * V.transpose();
                       if (!keep.empty()) {
                         Eigen::Map<const RowMatrix<T>> M(keep.data() + idx * block, rows, rows);
                         dp = dp.cwiseProduct(M);
                       }
                       // Softmax backward: ds = p * (dp - rowsum(dp * p)), then scale.
                       auto row_dot = (dp.cwiseProduct(P)).rowwise().sum().eval();
                       dp = P.cwiseProduct(dp.colwise() - row_dot) * scale;
                       if (q.requires_grad()) {
                         StridedView<T> dQ(q.grad().data() + off, rows, cols, stride);
                         dQ.noalias() += dp * K;
                       }
                       if (k.requires_grad()) {
                         StridedView<T> dK(k.grad().data() + off, rows, cols, stride);
                         dK.noalias() += dp.transpose() * Q;
                       }
                     }
                   }
                 });
  }
  return out;
}

template <typename T>
Tensor<T> attention_scores(const Tensor<T>& q, const Tensor<T>& k) {
  const auto g = geometry_of<T>(q, k, nullptr);
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(g.head_dim)));
  Tensor<T> out({g.batch, g.heads, g.seq, g.seq});
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(g.row_stride()));
  const auto rows = static_cast<Eigen::Index>(g.seq);
  const auto cols = static_cast<Eigen::Index>(g.head_dim);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t h = 0; h < g.heads; ++h) {
      ConstStridedView<T> Q(q.data().data() + g.offset(b, h), rows, cols, stride);
      ConstStridedView<T> K(k.data().data() + g.offset(b, h), rows, cols, stride);
      num::MatView<T> S(out.data().data() + (b * g.heads + h) * g.seq * g.seq, rows, rows);
      S.noalias() = (Q * K.transpose()) * scale;
    }
  }
  return out;
}

template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, const AttentionMask& mask) {
  auto scores = attention_scores(q, k);
  const auto seq = mask.seq();
  const auto blocks = scores.numel() / (seq * seq);
  RowMatrix<T> p(seq, seq);
  for (std::size_t i = 0; i < blocks; ++i) {
    num::MatView<T> S(scores.data().data() + i * seq * seq, seq, seq);
    p = S;
    masked_softmax(p, mask);
    S = p;
  }
  return scores;
}

#define EXPE_INSTANTIATE_ATTENTION(T)                                                                     \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const AttentionMask&, \
                               double, bool, num::Rng*);                                                  \
  template Tensor<T> attention_scores(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> attention_weights(const Tensor<T>&, const Tensor<T>&, const AttentionMask&);

EXPE_INSTANTIATE_ATTENTION(float)
EXPE_INSTANTIATE_ATTENTION(double)

}  // namespace expe::nn
