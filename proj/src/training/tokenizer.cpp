#include "expe/training/tokenizer.hpp"

#include "expe/error.hpp"

namespace expe::train {

std::vector<TokenId> tokenize_bytes(std::string_view text) {
  std::vector<TokenId> ids;
  ids.reserve(text.size() + 1);
  ids.push_back(kBosId);
  for (char c : text) ids.push_back(static_cast<TokenId>(static_cast<unsigned char>(c)));
  return ids;
}

std::string detokenize(std::span<const TokenId> ids) {
  std::string out;
  out.reserve(ids.size());
  for (auto id : ids) {
    if (id == kBosId) continue;
    if (id < 0 || id > 255) throw IndexError("detokenize: id " + std::to_string(id) + " is not a byte");
    out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
  }
  return out;
}

}  // namespace expe::train
