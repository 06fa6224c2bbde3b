#include "expe/training/sampler.hpp"

#include <algorithm>

#include "expe/error.hpp"
#include "expe/numerics/rng.hpp"

namespace expe::train {

BatchSampler::BatchSampler(const TokenStream& stream, std::size_t seq_len, std::size_t min_doc_tokens)
    : stream_(stream), seq_len_(seq_len) {
  if (seq_len == 0) throw ContractError("batch_sampler: seq_len must be positive");
  if (stream.size() <= seq_len) {
    throw DataError("stream '" + stream.id + "' has " + std::to_string(stream.size()) + " tokens, need more than " +
                    std::to_string(seq_len));
  }
  min_doc_tokens = std::max(min_doc_tokens, seq_len + 1);
  for (std::size_t d = 0; d < stream.doc_count(); ++d) {
    const auto [begin, end] = stream.doc_range(d);
    if (end - begin >= min_doc_tokens) ranges_.push_back({begin, end - begin - seq_len});
  }
  if (ranges_.empty()) {
    fallback_ = true;
    ranges_.push_back({0, stream.size() - seq_len});
  }
  for (const auto& r : ranges_) cumulative_.push_back(total_ += r.starts);
}

std::size_t BatchSampler::window_start(std::uint64_t seed, std::uint64_t step, std::uint64_t row) const {
  num::Rng rng(num::mix_seed(seed, step, row, 0xba7c));
  const auto k = rng.below(total_);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), k);
  const auto idx = static_cast<std::size_t>(it - cumulative_.begin());
  const auto before = idx == 0 ? 0 : cumulative_[idx - 1];
  return ranges_[idx].begin + static_cast<std::size_t>(k - before);
}

Batch BatchSampler::sample(std::size_t batch, std::uint64_t seed, std::uint64_t step, std::uint64_t first_row) const {
  if (batch == 0) throw ContractError("batch_sampler: batch must be positive");
  Batch out;
  out.batch = batch;
  out.seq = seq_len_;
  out.inputs.resize(batch * seq_len_);
  out.targets.resize(batch * seq_len_);
  const auto& tokens = stream_.tokens;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto start = window_start(seed, step, first_row + b);
    std::copy_n(tokens.begin() + static_cast<std::ptrdiff_t>(start), seq_len_, out.inputs.begin() + b * seq_len_);
    std::copy_n(tokens.begin() + static_cast<std::ptrdiff_t>(start + 1), seq_len_,
                out.targets.begin() + b * seq_len_);
  }
  return out;
}

Batch batch_sampler(const TokenStream& stream, std::size_t seq_len, std::size_t batch, std::uint64_t seed,
                    std::uint64_t step, std::size_t eval_max_multiple) {
  return BatchSampler(stream, seq_len, eval_max_multiple * seq_len + 1).sample(batch, seed, step);
}

}  // namespace expe::train
