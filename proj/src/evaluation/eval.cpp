#include "expe/evaluation/eval.hpp"

#include <algorithm>
#include <cmath>

#include "expe/error.hpp"
#include "expe/numerics/tape.hpp"
#include "expe/training/sampler.hpp"

namespace expe::eval {

template <typename T>
EvalResult eval_loss(nn::Transformer<T>& model, const train::TokenStream& stream, std::size_t eval_length,
                     const EvalOptions& opts) {
  if (eval_length == 0 || opts.n_windows == 0 || opts.batch == 0) {
    throw ContractError("eval_loss: eval_length, n_windows and batch must be positive");
  }
  const auto required = eval_length + opts.n_windows;
  auto insufficient = [&](std::size_t available) {
    return DataError("eval_loss: " + std::to_string(opts.n_windows) + " windows of " + std::to_string(eval_length) +
                     " tokens need " + std::to_string(required) + " tokens, stream '" + stream.id + "' has " +
                     std::to_string(available));
  };
  if (stream.size() < required) throw insufficient(stream.size());
  const train::BatchSampler sampler(stream, eval_length, eval_length + 1);
  if (sampler.start_count() < opts.n_windows) throw insufficient(stream.size());

  num::NoGradScope<T> no_grad;
  nn::ForwardOptions fwd;
  fwd.training = false;
  fwd.encoding = opts.encoding;
  std::vector<double> window_means;
  window_means.reserve(opts.n_windows);
  for (std::size_t first = 0; first < opts.n_windows; first += opts.batch) {
    const auto b = std::min(opts.batch, opts.n_windows - first);
    const auto batch = sampler.sample(b, opts.seed, 0, first);
    const auto logits = model.forward(batch.inputs, b, eval_length, fwd);
    const auto nll = num::token_nll(logits, batch.targets);
    for (std::size_t w = 0; w < b; ++w) {
      double s = 0;
      for (std::size_t t = 0; t < eval_length; ++t) s += nll[w * eval_length + t];
      window_means.push_back(s / static_cast<double>(eval_length));
    }
  }
  EvalResult r;
  r.windows = window_means.size();
  r.tokens = r.windows * eval_length;
  double sum = 0;
  for (auto m : window_means) sum += m;
  r.mean_loss = sum / static_cast<double>(r.windows);
  if (r.windows > 1) {
    double ss = 0;
    for (auto m : window_means) ss += (m - r.mean_loss) * (m - r.mean_loss);
    r.std_error = std::sqrt(ss / static_cast<double>(r.windows - 1) / static_cast<double>(r.windows));
  }
  return r;
}

void validate_sweep(const SweepOptions& opts) {
  if (opts.multiples.empty()) throw ConfigError("sweep: no multiples given");
  if (opts.scales.empty()) throw ConfigError("sweep: no scales given");
  for (auto m : opts.multiples) {
    if (m != 1 && m != 2 && m != 4 && m != 8 && m != 16) {
      throw ConfigError("sweep: multiple " + std::to_string(m) + " not in {1, 2, 4, 8, 16}");
    }
  }
  for (auto s : opts.scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("sweep: scale factors must be positive");
  }
  if (opts.n_windows == 0) throw ConfigError("sweep: n_windows must be positive");
}

template <typename T>
EvalReport extrapolation_sweep(nn::Transformer<T>& model, const train::TokenStream& stream,
                               const SweepOptions& opts) {
  validate_sweep(opts);
  const auto& base = model.config().encoding;
  EvalReport report;
  report.train_seq_len = model.config().seq_len;
  for (auto multiple : opts.multiples) {
    for (auto scale : opts.scales) {
      EvalRow row;
      row.model = opts.model_tag;
      row.encoding = base.name();
      row.scale = scale;
      row.multiple = multiple;
      row.eval_len = multiple * model.config().seq_len;
      row.seed = opts.seed;
      try {
        const auto scheme = scale == 1.0 ? base : pos::scale_encoding(base, scale);
        EvalOptions eo;
        eo.n_windows = opts.n_windows;
        eo.seed = opts.seed;
        eo.batch = opts.batch;
        eo.encoding = &scheme;
        const auto r = eval_loss(model, stream, row.eval_len, eo);
        row.loss = r.mean_loss;
        row.std_error = r.std_error;
        row.tokens = r.tokens;
      } catch (const Error& e) {
        row.error = e.what();
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

template EvalResult eval_loss(nn::Transformer<float>&, const train::TokenStream&, std::size_t, const EvalOptions&);
template EvalResult eval_loss(nn::Transformer<double>&, const train::TokenStream&, std::size_t, const EvalOptions&);
template EvalReport extrapolation_sweep(nn::Transformer<float>&, const train::TokenStream&, const SweepOptions&);
template EvalReport extrapolation_sweep(nn::Transformer<double>&, const train::TokenStream&, const SweepOptions&);

}  // namespace expe::eval
