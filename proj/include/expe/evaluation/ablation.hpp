#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "expe/evaluation/eval.hpp"
#include "expe/training/trainer.hpp"

namespace expe::eval {

enum class AblationVariant { baseline, stable_p, l1, once, learned, learned_initialized };

inline constexpr std::array<AblationVariant, 6> kAblationVariants = {
    AblationVariant::baseline, AblationVariant::stable_p, AblationVariant::l1,
    AblationVariant::once,     AblationVariant::learned,  AblationVariant::learned_initialized};

std::string variant_tag(AblationVariant v);
AblationVariant variant_from_tag(const std::string& tag);

// The ExPE base config with one ablation applied. Throws
// UnsupportedSchemeError unless the base encoding is plain ExPE.
nn::ModelConfig ablation_config(const nn::ModelConfig& base, AblationVariant v);

struct AblationRun {
  AblationVariant variant = AblationVariant::baseline;
  std::string tag;
  EvalReport report;
  double cpu_seconds = 0;  // training loop only
  double wall_seconds = 0;
  double relative_time = 1;  // cpu_seconds / baseline cpu_seconds
  bool diverged = false;
  std::optional<double> last_finite_loss;
  std::vector<train::MetricRow> metrics;
};

template <typename T>
struct AblationOptions {
  std::vector<std::size_t> multiples{1, 2, 4};
  std::size_t n_windows = 64;
  std::uint64_t eval_seed = 0;
  std::size_t eval_batch = 8;
  // Subset to run; the baseline is always run first since it defines the time unit.
  std::vector<AblationVariant> variants{kAblationVariants.begin(), kAblationVariants.end()};
  // Per-variant trainer hooks (metrics file, checkpoints, logging).
  std::function<train::TrainHooks<T>(const std::string& tag)> hooks;
  // Called after each variant with its trained model.
  std::function<void(const AblationRun&, nn::Transformer<T>&)> on_variant;
};

// Trains every variant from the same seed on `train_stream`, evaluates each
// on `eval_stream` at the given multiples, and normalises training CPU time
// to the baseline. A variant whose loss turns non-finite keeps the weights
// from before the failing step, is evaluated as is, and is flagged diverged;
// a non-finite evaluation falls back to the last finite training loss.
template <typename T>
std::vector<AblationRun> ablation_suite(const nn::ModelConfig& base, const train::TrainConfig& train_cfg,
                                        const train::TokenStream& train_stream,
                                        const train::TokenStream& eval_stream, const AblationOptions<T>& opts = {});

}  // namespace expe::eval
