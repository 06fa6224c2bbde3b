#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "expe/training/config.hpp"
#include "expe/transformer/config.hpp"

namespace expe::cli {

struct EvalSection {
  std::size_t n_windows = 64;
  std::uint64_t seed = 0;
  std::size_t batch = 8;
  std::vector<std::size_t> multiples{1, 2, 4, 8, 16};
  std::vector<double> scales{1.0};
  // Defaults to <out_dir>/<run_name>/checkpoints/final.ckpt.
  std::string checkpoint;
  std::string split = "test";  // train, dev or test
};

struct AblationSection {
  std::vector<std::size_t> multiples{1, 2, 4};
  std::vector<std::string> variants{"baseline", "stable_p", "l1", "once", "learned", "learned_initialized"};
};

struct QuantcheckSection {
  std::string format = "bf16-sim";
  std::uint64_t max_len = 16384;
  double S = 0.0;
  double theta = 1.0 / 2048.0;
  double theta1 = 1.0 / 2048.0;  // defaults to theta
  double theta2 = 1.0 / 16.0;
  std::size_t l = 16;  // defaults to model.d_model / 8
};

// Everything one run needs, parsed from a single JSON document.
struct RunConfig {
  nn::ModelConfig model;
  train::TrainConfig training;
  EvalSection eval;
  AblationSection ablation;
  QuantcheckSection quantcheck;
  std::string out_dir;  // defaults to $EXPE_OUT_DIR, else "runs"
  std::string run_name = "run";

  std::filesystem::path run_dir() const { return std::filesystem::path(out_dir) / run_name; }
};

// Materialises every default and rejects unknown keys. Throws
// ConfigValidationError carrying every violation with its key path.
RunConfig parse_run_config(const nlohmann::json& j);

// Reads and parses a config file (ConfigError if unreadable or not JSON).
RunConfig validate_config(const std::filesystem::path& path);

// Fully explicit form; parse_run_config(run_config_to_json(c)) == c.
nlohmann::json run_config_to_json(const RunConfig& cfg);

// Applies "a.b.c=value" assignments. The value is parsed as JSON when it is
// valid JSON and taken as a string otherwise. Intermediate objects are
// created as needed.
nlohmann::json apply_overrides(nlohmann::json j, const std::vector<std::string>& assignments);

}  // namespace expe::cli
