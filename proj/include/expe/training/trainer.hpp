#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "expe/error.hpp"
#include "expe/numerics/optim.hpp"
#include "expe/training/checkpoint.hpp"
#include "expe/training/config.hpp"
#include "expe/training/sampler.hpp"
#include "expe/transformer/model.hpp"

namespace expe::train {

struct MetricRow {
  std::uint64_t step = 0;  // 1-based count of completed optimizer steps
  double lr = 0;
  double train_loss = 0;
  double wall_ms = 0;  // since the start of the run
};

struct DivergenceSnapshot {
  std::uint64_t step = 0;
  double lr = 0;
  double loss = 0;
  std::optional<double> last_finite_loss;
  std::vector<std::pair<std::string, double>> grad_norms;
};

// Thrown when the training loss stops being finite.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(DivergenceSnapshot snapshot);
  const DivergenceSnapshot& snapshot() const { return snapshot_; }

 private:
  DivergenceSnapshot snapshot_;
};

template <typename T>
struct TrainHooks {
  std::optional<std::filesystem::path> metrics_csv;
  std::optional<std::filesystem::path> checkpoint_dir;
  // Called every TrainConfig::eval_every steps.
  std::function<void(std::uint64_t step, nn::Transformer<T>& model)> on_eval;
  std::size_t log_every = 0;  // progress lines on stderr; 0 = silent
};

struct TrainResult {
  std::vector<MetricRow> metrics;
  std::uint64_t steps = 0;
  double wall_seconds = 0;
  double cpu_seconds = 0;  // process CPU time spent in the loop
  bool sampler_fallback = false;
  std::vector<std::filesystem::path> checkpoints;
  Checkpoint final;
};

inline constexpr const char* kMetricsHeader = "step,lr,train_loss,wall_ms";

template <typename T>
class Trainer {
 public:
  Trainer(nn::Transformer<T>& model, TrainConfig config);

  const TrainConfig& config() const { return config_; }
  num::AdamW<T>& optimizer() { return optimizer_; }
  std::uint64_t step() const { return step_; }

  // Continue from a checkpoint produced by this model shape.
  void resume(const Checkpoint& ckpt);

  // One optimizer step: accumulate grad_accum_steps micro-batches, average,
  // clip, and apply AdamW at the scheduled rate. Returns the mean loss.
  double train_step(const BatchSampler& sampler);

  // Steps until total_steps.
  TrainResult run(const TokenStream& stream, const TrainHooks<T>& hooks = {});

  Checkpoint checkpoint() { return capture_checkpoint(model_, &optimizer_, step_, config_); }

 private:
  nn::Transformer<T>& model_;
  TrainConfig config_;
  num::AdamW<T> optimizer_;
  std::uint64_t step_ = 0;
  std::optional<double> last_finite_loss_;
};

template <typename T>
TrainResult train(nn::Transformer<T>& model, const TrainConfig& config, const TokenStream& stream,
                  const TrainHooks<T>& hooks = {}) {
  Trainer<T> trainer(model, config);
  return trainer.run(stream, hooks);
}

}  // namespace expe::train
