#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace acceptance {

// Result of one criterion: a verdict, one line per sub-check, and the raw
// numbers behind it.
struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;
  nlohmann::json measured = nlohmann::json::object();

  void check(bool ok, const std::string& what);
  void note(const std::string& what);
};

std::string fmt(double x, int digits = 4);

struct DeskOptions {
  std::filesystem::path cache_dir;
  std::uint64_t steps = 1000;
  std::size_t n_windows = 64;
  bool log = true;
};

Outcome criterion_exactness();
Outcome criterion_gradients();
Outcome criterion_causality();
Outcome criterion_quantization();
Outcome criterion_engineering();

// The desk runs behind criteria 4 to 6 share trained models; they are
// trained once per cache key and reused.
struct DeskResults {
  nlohmann::json runs;  // tag -> {rows, cpu_seconds, wall_seconds, diverged, ...}
  nlohmann::json key;
};
DeskResults desk_runs(const DeskOptions& opts);

Outcome criterion_extrapolation(const DeskResults& desk);
Outcome criterion_scaling(const DeskResults& desk);
Outcome criterion_ablation(const DeskResults& desk);

}  // namespace acceptance
