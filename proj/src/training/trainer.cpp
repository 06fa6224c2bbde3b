#include "expe/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "expe/numerics/schedule.hpp"
#include "expe/numerics/tape.hpp"

namespace expe::train {

namespace {

std::string describe(const DivergenceSnapshot& s) {
  std::ostringstream os;
  os << "training diverged at step " << s.step << " (lr " << s.lr << ", loss " << s.loss;
  if (s.last_finite_loss) os << ", last finite loss " << *s.last_finite_loss;
  os << ")";
  for (const auto& [name, norm] : s.grad_norms) os << "\n  grad_norm " << name << " = " << norm;
  return os.str();
}

template <typename T>
double l2(std::span<const T> g) {
  double s = 0;
  for (auto v : g) s += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(s);
}

}  // namespace

DivergenceError::DivergenceError(DivergenceSnapshot snapshot)
    : Error(describe(snapshot)), snapshot_(std::move(snapshot)) {}

template <typename T>
Trainer<T>::Trainer(nn::Transformer<T>& model, TrainConfig config)
    : model_(model), config_(std::move(config)), optimizer_(model.parameters(), config_.adamw) {
  config_.validate();
  config_.schedule.validate();
}

template <typename T>
void Trainer<T>::resume(const Checkpoint& ckpt) {
  restore_model(ckpt, model_);
  restore_optimizer(ckpt, optimizer_);
  step_ = ckpt.step;
}

template <typename T>
double Trainer<T>::train_step(const BatchSampler& sampler) {
  const double lr = num::cosine_schedule(step_, config_.schedule);
  const auto B = config_.batch_size;
  const auto accum = config_.grad_accum_steps;
  optimizer_.zero_grad();
  double loss_sum = 0;
  for (std::size_t m = 0; m < accum; ++m) {
    const auto batch = sampler.sample(B, config_.seed, step_, m * B);
    num::Tape<T> tape;
    num::TapeScope<T> scope(tape);
    nn::ForwardOptions opts;
    opts.training = true;
    auto loss = model_.loss(batch.inputs, batch.targets, B, batch.seq, opts);
    loss_sum += static_cast<double>(loss.item());
    num::backward(loss, tape);
  }
  const double mean = loss_sum / static_cast<double>(accum);
  if (!std::isfinite(mean)) {
    DivergenceSnapshot snap{step_ + 1, lr, mean, last_finite_loss_, {}};
    for (const auto& p : optimizer_.params()) snap.grad_norms.emplace_back(p.name, l2<T>(p.tensor.grad()));
    throw DivergenceError(std::move(snap));
  }
  if (accum > 1) {
    const T inv = static_cast<T>(1.0 / static_cast<double>(accum));
    for (const auto& p : optimizer_.params()) {
      for (auto& g : p.tensor.grad()) g *= inv;
    }
  }
  if (config_.grad_clip) optimizer_.clip_grad_norm(*config_.grad_clip);
  optimizer_.step(lr);
  ++step_;
  last_finite_loss_ = mean;
  return mean;
}

template <typename T>
TrainResult Trainer<T>::run(const TokenStream& stream, const TrainHooks<T>& hooks) {
  stream.validate(model_.config().vocab_size);
  const auto seq = model_.config().seq_len;
  const BatchSampler sampler(stream, seq, config_.eval_max_multiple * seq + 1);
  TrainResult result;
  result.sampler_fallback = sampler.fallback();
  if (sampler.fallback() && hooks.log_every) {
    std::cerr << "warning: no document in '" << stream.id << "' reaches " << config_.eval_max_multiple * seq + 1
              << " tokens; sampling from the concatenated stream\n";
  }

  std::ofstream metrics;
  if (hooks.metrics_csv) {
    if (hooks.metrics_csv->has_parent_path()) std::filesystem::create_directories(hooks.metrics_csv->parent_path());
    metrics.open(*hooks.metrics_csv, std::ios::trunc);
    if (!metrics) throw Error("cannot write metrics file " + hooks.metrics_csv->string());
    metrics << kMetricsHeader << '\n';
    metrics.precision(9);
  }
  auto save = [&](const std::string& file) {
    if (!hooks.checkpoint_dir) return;
    const auto path = *hooks.checkpoint_dir / file;
    save_checkpoint(checkpoint(), path);
    result.checkpoints.push_back(path);
  };

  const auto wall0 = std::chrono::steady_clock::now();
  const auto cpu0 = std::clock();
  const auto total = config_.total_steps();
  while (step_ < total) {
    const double lr = num::cosine_schedule(step_, config_.schedule);
    const double loss = train_step(sampler);
    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
    result.metrics.push_back({step_, lr, loss, wall_ms});
    if (metrics.is_open()) metrics << step_ << ',' << lr << ',' << loss << ',' << wall_ms << '\n' << std::flush;
    if (hooks.log_every && (step_ % hooks.log_every == 0 || step_ == total)) {
      std::cerr << "step " << step_ << "/" << total << " lr " << lr << " loss " << loss << "\n";
    }
    if (config_.checkpoint_every && step_ % config_.checkpoint_every == 0 && step_ < total) {
      save("step_" + std::to_string(step_) + ".ckpt");
    }
    if (config_.eval_every && hooks.on_eval && step_ % config_.eval_every == 0) hooks.on_eval(step_, model_);
  }
  result.cpu_seconds = static_cast<double>(std::clock() - cpu0) / CLOCKS_PER_SEC;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  result.steps = step_;
  save("final.ckpt");
  result.final = checkpoint();
  return result;
}

template class Trainer<float>;
template class Trainer<double>;

}  // namespace expe::train
