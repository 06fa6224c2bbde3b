#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "expe/training/tokenizer.hpp"

namespace expe::train {

// Flat token sequence with document boundaries. Document i occupies
// tokens[doc_starts[i], doc_starts[i + 1]) (the last one runs to the end).
struct TokenStream {
  std::string id;
  std::vector<TokenId> tokens;
  std::vector<std::size_t> doc_starts;

  std::size_t size() const { return tokens.size(); }
  std::size_t doc_count() const { return doc_starts.size(); }
  std::pair<std::size_t, std::size_t> doc_range(std::size_t i) const;

  // Throws DataError if an id is out of range or boundaries are unsorted.
  void validate(std::size_t vocab_size) const;
};

TokenStream stream_from_documents(std::string id, const std::vector<std::string>& docs);

// A file is split into documents at form-feed ('\f') bytes; a directory
// contributes every regular file (sorted by name), each split the same way.
// Empty documents are dropped.
std::vector<std::string> read_corpus_documents(const std::filesystem::path& path);

struct CorpusSplit {
  TokenStream train;
  TokenStream dev;
  TokenStream test;
};

// 90/5/5 by document (doc i goes to dev when i % 20 == 18, test when 19).
// With fewer than 20 documents each document is cut by bytes instead.
CorpusSplit split_corpus(const std::string& id, const std::vector<std::string>& docs);

CorpusSplit load_corpus(const std::filesystem::path& path);

}  // namespace expe::train
