#include "expe/numerics/schedule.hpp"

#include <cmath>
#include <numbers>

#include "expe/error.hpp"

namespace expe::num {

void ScheduleConfig::validate() const {
  if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) {
    throw ConfigError("schedule: warmup_ratio must lie in [0, 1)");
  }
  if (!(end_lr <= peak_lr)) throw ConfigError("schedule: end_lr must not exceed peak_lr");
  if (end_lr < 0.0) throw ConfigError("schedule: end_lr must be non-negative");
}

std::uint64_t ScheduleConfig::warmup_steps() const {
  return static_cast<std::uint64_t>(std::llround(warmup_ratio * static_cast<double>(total_steps)));
}

double cosine_schedule(std::uint64_t step, const ScheduleConfig& cfg) {
  if (step >= cfg.total_steps) return cfg.end_lr;
  const auto warmup = cfg.warmup_steps();
  if (step < warmup) {
    return cfg.peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  const double span = static_cast<double>(cfg.total_steps - warmup);
  const double progress = static_cast<double>(step - warmup) / span;
  return cfg.end_lr + 0.5 * (cfg.peak_lr - cfg.end_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace expe::num
