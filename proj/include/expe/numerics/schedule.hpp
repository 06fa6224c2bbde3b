#pragma once

#include <cstdint>

namespace expe::num {

struct ScheduleConfig {
  double peak_lr = 1e-3;
  double end_lr = 1e-4;
  std::uint64_t total_steps = 1000;
  double warmup_ratio = 0.1;

  // Throws ConfigError unless 0 <= warmup_ratio < 1 and end_lr <= peak_lr.
  void validate() const;
  std::uint64_t warmup_steps() const;
};

// Linear warmup reaching peak_lr at step warmup_steps - 1, then cosine decay to end_lr at
// total_steps. Steps past total_steps return end_lr.
double cosine_schedule(std::uint64_t step, const ScheduleConfig& cfg);

}  // namespace expe::num
