#include "expe/evaluation/ablation.hpp"

#include <chrono>
#include <cmath>
#include <ctime>

#include "expe/error.hpp"

namespace expe::eval {

std::string variant_tag(AblationVariant v) {
  switch (v) {
    case AblationVariant::baseline: return "baseline";
    case AblationVariant::stable_p: return "stable_p";
    case AblationVariant::l1: return "l1";
    case AblationVariant::once: return "once";
    case AblationVariant::learned: return "learned";
    case AblationVariant::learned_initialized: return "learned_initialized";
  }
  return "unknown";
}

AblationVariant variant_from_tag(const std::string& tag) {
  for (auto v : kAblationVariants) {
    if (variant_tag(v) == tag) return v;
  }
  throw ConfigError("unknown ablation variant '" + tag + "'");
}

nn::ModelConfig ablation_config(const nn::ModelConfig& base, AblationVariant v) {
  const auto& enc = base.encoding;
  if (enc.kind() != pos::SchemeKind::expe || enc.ablation.stable_p || enc.ablation.apply_once ||
      enc.ablation.learned != pos::LearnedMode::off) {
    throw UnsupportedSchemeError("ablation_suite: base model must use plain ExPE, got " + enc.name());
  }
  auto cfg = base;
  auto& flags = cfg.encoding.ablation;
  switch (v) {
    case AblationVariant::baseline: break;
    case AblationVariant::stable_p: flags.stable_p = true; break;
    case AblationVariant::l1: std::get<pos::ExpeParams>(cfg.encoding.params).width = 1; break;
    case AblationVariant::once: flags.apply_once = true; break;
    case AblationVariant::learned: flags.learned = pos::LearnedMode::learned_random; break;
    case AblationVariant::learned_initialized: flags.learned = pos::LearnedMode::learned_initialized; break;
  }
  cfg.validate();
  return cfg;
}

template <typename T>
std::vector<AblationRun> ablation_suite(const nn::ModelConfig& base, const train::TrainConfig& train_cfg,
                                        const train::TokenStream& train_stream,
                                        const train::TokenStream& eval_stream, const AblationOptions<T>& opts) {
  std::vector<AblationVariant> order{AblationVariant::baseline};
  for (auto v : opts.variants) {
    if (v != AblationVariant::baseline) order.push_back(v);
  }
  // Validates the base before any training starts.
  for (auto v : order) ablation_config(base, v);

  std::vector<AblationRun> runs;
  for (auto v : order) {
    AblationRun run;
    run.variant = v;
    run.tag = variant_tag(v);
    nn::Transformer<T> model(ablation_config(base, v), train_cfg.seed);
    train::Trainer<T> trainer(model, train_cfg);
    const auto hooks = opts.hooks ? opts.hooks(run.tag) : train::TrainHooks<T>{};

    const auto wall0 = std::chrono::steady_clock::now();
    const auto cpu0 = std::clock();
    try {
      const auto result = trainer.run(train_stream, hooks);
      run.metrics = result.metrics;
      if (!result.metrics.empty()) run.last_finite_loss = result.metrics.back().train_loss;
    } catch (const train::DivergenceError& e) {
      run.diverged = true;
      run.last_finite_loss = e.snapshot().last_finite_loss;
    }
    run.cpu_seconds = static_cast<double>(std::clock() - cpu0) / CLOCKS_PER_SEC;
    run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

    SweepOptions so;
    so.multiples = opts.multiples;
    so.scales = {1.0};
    so.n_windows = opts.n_windows;
    so.seed = opts.eval_seed;
    so.batch = opts.eval_batch;
    so.model_tag = run.tag;
    run.report = extrapolation_sweep(model, eval_stream, so);
    for (auto& row : run.report.rows) {
      row.diverged = run.diverged;
      if (!row.error && !std::isfinite(row.loss)) {
        row.diverged = true;
        row.loss = run.last_finite_loss.value_or(0.0);
        row.std_error = 0;
      }
    }
    if (opts.on_variant) opts.on_variant(run, model);
    runs.push_back(std::move(run));
  }
  const double unit = runs.front().cpu_seconds;
  for (auto& r : runs) r.relative_time = unit > 0 ? r.cpu_seconds / unit : 1.0;
  runs.front().relative_time = 1.0;
  return runs;
}

template std::vector<AblationRun> ablation_suite(const nn::ModelConfig&, const train::TrainConfig&,
                                                 const train::TokenStream&, const train::TokenStream&,
                                                 const AblationOptions<float>&);
template std::vector<AblationRun> ablation_suite(const nn::ModelConfig&, const train::TrainConfig&,
                                                 const train::TokenStream&, const train::TokenStream&,
                                                 const AblationOptions<double>&);

}  // namespace expe::eval
