#pragma once

#include <cstdint>
#include <vector>

#include "expe/training/corpus.hpp"

namespace expe::train {

struct Batch {
  std::size_t batch = 0;
  std::size_t seq = 0;
  std::vector<TokenId> inputs;   // batch * seq, row-major
  std::vector<TokenId> targets;  // inputs shifted left by one
};

// Draws fixed-length windows uniformly over the admissible start positions.
// Only documents with at least min_doc_tokens tokens are used; if none
// qualifies the whole concatenated stream is used instead and fallback()
// reports it. Row r of step s depends only on (seed, s, r).
class BatchSampler {
 public:
  BatchSampler(const TokenStream& stream, std::size_t seq_len, std::size_t min_doc_tokens);

  bool fallback() const { return fallback_; }
  std::size_t seq_len() const { return seq_len_; }
  // Number of distinct window starts.
  std::uint64_t start_count() const { return total_; }

  // Position in the stream of the first input token of (seed, step, row).
  std::size_t window_start(std::uint64_t seed, std::uint64_t step, std::uint64_t row) const;

  // Rows first_row .. first_row + batch - 1 of (seed, step).
  Batch sample(std::size_t batch, std::uint64_t seed, std::uint64_t step, std::uint64_t first_row = 0) const;

 private:
  struct Range {
    std::size_t begin;
    std::uint64_t starts;
  };
  const TokenStream& stream_;
  std::size_t seq_len_;
  bool fallback_ = false;
  std::vector<Range> ranges_;
  std::vector<std::uint64_t> cumulative_;
  std::uint64_t total_ = 0;
};

// Default long-document threshold: 16 training lengths plus the target token.
Batch batch_sampler(const TokenStream& stream, std::size_t seq_len, std::size_t batch, std::uint64_t seed,
                    std::uint64_t step, std::size_t eval_max_multiple = 16);

}  // namespace expe::train
