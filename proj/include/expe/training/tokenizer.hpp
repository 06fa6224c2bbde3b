#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "expe/numerics/ops.hpp"

namespace expe::train {

using num::TokenId;

// Byte-level vocabulary: ids 0..255 are the bytes themselves, 256 marks the
// beginning of a document.
inline constexpr TokenId kBosId = 256;
inline constexpr std::size_t kByteVocabSize = 257;

// [BOS, byte_0, byte_1, ...]
std::vector<TokenId> tokenize_bytes(std::string_view text);

// Inverse of tokenize_bytes; BOS ids are dropped.
std::string detokenize(std::span<const TokenId> ids);

}  // namespace expe::train
