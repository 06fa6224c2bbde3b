#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "expe/json_fields.hpp"
#include "expe/numerics/optim.hpp"
#include "expe/numerics/schedule.hpp"

namespace expe::train {

enum class Precision { fp32, fp64 };

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t grad_accum_steps = 1;
  num::ScheduleConfig schedule{};  // total_steps lives here
  num::AdamWHyper adamw{};
  std::optional<double> grad_clip;  // global-norm clip; off by default
  std::uint64_t seed = 1;
  // Corpus file or directory; empty selects the bundled sample corpus.
  std::string corpus;
  std::size_t checkpoint_every = 0;  // 0 = only at the end
  std::size_t eval_every = 0;        // 0 = never during training
  std::size_t eval_windows = 16;     // dev windows per periodic evaluation
  // Training windows come from documents at least this many training lengths long.
  std::size_t eval_max_multiple = 16;
  Precision precision = Precision::fp32;

  std::uint64_t total_steps() const { return schedule.total_steps; }
  // Throws ConfigValidationError listing every violation.
  void validate() const;
};

const char* precision_name(Precision p);

// Reads the "training" section; violations go to the reader's error list.
TrainConfig read_train_config(FieldReader& r);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace expe::train
