#include "expe/training/config.hpp"

#include <cmath>

namespace expe::train {

const char* precision_name(Precision p) { return p == Precision::fp64 ? "fp64" : "fp32"; }

namespace {

void check(const TrainConfig& c, FieldReader& r) {
  if (c.batch_size < 1) r.error("batch_size", "must be at least 1");
  if (c.grad_accum_steps < 1) r.error("grad_accum_steps", "must be at least 1");
  if (!(c.schedule.peak_lr > 0.0) || !std::isfinite(c.schedule.peak_lr)) r.error("peak_lr", "must be positive");
  if (!(c.schedule.end_lr >= 0.0)) r.error("end_lr", "must be non-negative");
  if (c.schedule.end_lr > c.schedule.peak_lr) r.error("end_lr", "must not exceed peak_lr");
  if (!(c.schedule.warmup_ratio >= 0.0 && c.schedule.warmup_ratio < 1.0)) {
    r.error("warmup_ratio", "must lie in [0, 1)");
  }
  if (!(c.adamw.beta1 >= 0.0 && c.adamw.beta1 < 1.0)) r.error("beta1", "must lie in [0, 1)");
  if (!(c.adamw.beta2 >= 0.0 && c.adamw.beta2 < 1.0)) r.error("beta2", "must lie in [0, 1)");
  if (!(c.adamw.eps > 0.0)) r.error("adam_eps", "must be positive");
  if (!(c.adamw.weight_decay >= 0.0)) r.error("weight_decay", "must be non-negative");
  if (c.grad_clip && !(*c.grad_clip > 0.0)) r.error("grad_clip", "must be positive or null");
  if (c.eval_windows < 1) r.error("eval_windows", "must be at least 1");
  if (c.eval_max_multiple < 1) r.error("eval_max_multiple", "must be at least 1");
}

}  // namespace

void TrainConfig::validate() const {
  std::vector<std::string> errors;
  const nlohmann::json empty = nlohmann::json::object();
  FieldReader r(empty, "training", errors);
  check(*this, r);
  if (!errors.empty()) throw ConfigValidationError(errors);
}

TrainConfig read_train_config(FieldReader& r) {
  TrainConfig c;
  r.get_count("batch_size", c.batch_size);
  r.get_count("grad_accum_steps", c.grad_accum_steps);
  std::size_t total = c.schedule.total_steps;
  r.get_count("total_steps", total);
  c.schedule.total_steps = total;
  r.get("peak_lr", c.schedule.peak_lr);
  r.get("end_lr", c.schedule.end_lr);
  r.get("warmup_ratio", c.schedule.warmup_ratio);
  r.get("beta1", c.adamw.beta1);
  r.get("beta2", c.adamw.beta2);
  r.get("adam_eps", c.adamw.eps);
  r.get("weight_decay", c.adamw.weight_decay);
  // An explicit null turns clipping off.
  r.get("grad_clip", c.grad_clip);
  if (r.is_null("grad_clip")) c.grad_clip.reset();
  r.get("seed", c.seed);
  r.get("corpus", c.corpus);
  r.get_count("checkpoint_every", c.checkpoint_every);
  r.get_count("eval_every", c.eval_every);
  r.get_count("eval_windows", c.eval_windows);
  r.get_count("eval_max_multiple", c.eval_max_multiple);
  std::string precision = precision_name(c.precision);
  r.get("precision", precision);
  if (precision == "fp32") {
    c.precision = Precision::fp32;
  } else if (precision == "fp64") {
    c.precision = Precision::fp64;
  } else {
    r.error("precision", "must be \"fp32\" or \"fp64\"");
  }
  r.reject_unknown();
  check(c, r);
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"grad_accum_steps", c.grad_accum_steps},
          {"total_steps", c.schedule.total_steps},
          {"peak_lr", c.schedule.peak_lr},
          {"end_lr", c.schedule.end_lr},
          {"warmup_ratio", c.schedule.warmup_ratio},
          {"beta1", c.adamw.beta1},
          {"beta2", c.adamw.beta2},
          {"adam_eps", c.adamw.eps},
          {"weight_decay", c.adamw.weight_decay},
          {"grad_clip", c.grad_clip ? nlohmann::json(*c.grad_clip) : nlohmann::json(nullptr)},
          {"seed", c.seed},
          {"corpus", c.corpus},
          {"checkpoint_every", c.checkpoint_every},
          {"eval_every", c.eval_every},
          {"eval_windows", c.eval_windows},
          {"eval_max_multiple", c.eval_max_multiple},
          {"precision", precision_name(c.precision)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  std::vector<std::string> errors;
  FieldReader r(j, "training", errors);
  auto c = read_train_config(r);
  if (!errors.empty()) throw ConfigValidationError(errors);
  return c;
}

}  // namespace expe::train
