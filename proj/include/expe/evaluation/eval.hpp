#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "expe/positional/encoding.hpp"
#include "expe/training/corpus.hpp"
#include "expe/transformer/model.hpp"

namespace expe::eval {

struct EvalResult {
  double mean_loss = 0;  // nats per predicted token
  double std_error = 0;  // standard error over per-window means
  std::size_t tokens = 0;
  std::size_t windows = 0;
};

struct EvalOptions {
  std::size_t n_windows = 64;
  std::uint64_t seed = 0;
  std::size_t batch = 8;  // windows per forward pass
  // Evaluate with this scheme instead of the model's own (same kind).
  const pos::EncodingScheme* encoding = nullptr;
};

// Mean next-token cross-entropy over every position of n_windows windows of
// eval_length tokens. Windows lie inside single documents whenever some
// document is long enough. Deterministic per seed; dropout is off. Throws
// DataError naming required and available tokens when the stream is too small.
template <typename T>
EvalResult eval_loss(nn::Transformer<T>& model, const train::TokenStream& stream, std::size_t eval_length,
                     const EvalOptions& opts = {});

template <typename T>
EvalResult eval_loss(nn::Transformer<T>& model, const train::TokenStream& stream, std::size_t eval_length,
                     std::size_t n_windows, std::uint64_t seed) {
  EvalOptions opts;
  opts.n_windows = n_windows;
  opts.seed = seed;
  return eval_loss(model, stream, eval_length, opts);
}

inline constexpr int kReportSchemaVersion = 1;

struct EvalRow {
  std::string model;
  std::string encoding;
  double scale = 1;
  std::size_t multiple = 1;
  std::size_t eval_len = 0;
  double loss = 0;  // last finite value when diverged
  double std_error = 0;
  std::size_t tokens = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  // Set when the cell could not be evaluated (e.g. length beyond a learned
  // table); loss and std_error are then meaningless and tokens is 0.
  std::optional<std::string> error;
};

struct EvalReport {
  int schema_version = kReportSchemaVersion;
  std::size_t train_seq_len = 0;
  std::vector<EvalRow> rows;
  nlohmann::json metadata = nlohmann::json::object();
};

struct SweepOptions {
  std::vector<std::size_t> multiples{1, 2, 4, 8, 16};
  std::vector<double> scales{1.0};
  std::size_t n_windows = 64;
  std::uint64_t seed = 0;
  std::size_t batch = 8;
  std::string model_tag = "model";
};

// Throws ConfigError unless every multiple is in {1, 2, 4, 8, 16} and every
// scale is positive.
void validate_sweep(const SweepOptions& opts);

// One row per (multiple, scale), multiples outermost. Scaling goes through
// scale_encoding on a copy of the scheme; the weights are never touched.
// A failing cell becomes a row with `error` set and the sweep continues.
template <typename T>
EvalReport extrapolation_sweep(nn::Transformer<T>& model, const train::TokenStream& stream,
                               const SweepOptions& opts);

}  // namespace expe::eval
