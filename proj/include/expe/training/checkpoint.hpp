#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "expe/numerics/optim.hpp"
#include "expe/training/config.hpp"
#include "expe/transformer/model.hpp"

namespace expe::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  num::Shape shape;
  std::vector<float> values;
};

// Model weights plus the optimizer and rng state needed to resume. Values are
// stored as 32-bit floats, so a 64-bit model round-trips only to float
// precision.
struct Checkpoint {
  nn::ModelConfig model;
  std::optional<TrainConfig> train;
  std::uint64_t step = 0;
  std::string rng_state;
  std::uint64_t adam_t = 0;
  std::vector<CheckpointTensor> params;
  std::vector<CheckpointTensor> adam_m;  // empty when no optimizer was captured
  std::vector<CheckpointTensor> adam_v;

  const CheckpointTensor* find(const std::string& name) const;
};

template <typename T>
Checkpoint capture_checkpoint(nn::Transformer<T>& model, const num::AdamW<T>* optimizer, std::uint64_t step,
                              const std::optional<TrainConfig>& train = std::nullopt);

// Copies weights into an existing model. Throws CheckpointShapeError naming
// the first tensor that is missing or shaped differently.
template <typename T>
void restore_model(const Checkpoint& ckpt, nn::Transformer<T>& model);

template <typename T>
void restore_optimizer(const Checkpoint& ckpt, num::AdamW<T>& optimizer);

// Builds a model from the embedded config and restores its weights and rng.
template <typename T>
nn::Transformer<T> model_from_checkpoint(const Checkpoint& ckpt);

// Layout: "EXPE", u32 version, u64 header length, JSON header, then the
// little-endian float32 payloads in manifest order.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws CheckpointCorruptError (bad magic, truncation, malformed header),
// CheckpointVersionError, or CheckpointShapeError (manifest disagrees with the
// embedded model config).
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace expe::train
