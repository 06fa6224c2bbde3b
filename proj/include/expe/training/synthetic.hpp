#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace expe::train {

// Deterministic book-like English-shaped text: chapters of wrapped paragraphs
// built from a Zipf-distributed pseudo-word lexicon, with a recurring cast of
// character names per document so that distant context carries information.
struct SyntheticCorpusOptions {
  std::uint64_t seed = 20240611;
  std::size_t target_bytes = 6u << 20;
  std::size_t min_doc_bytes = 20000;
  std::size_t max_doc_bytes = 60000;
  std::size_t line_width = 72;
};

std::vector<std::string> synthetic_documents(const SyntheticCorpusOptions& opts);

// Documents joined with form feeds, the separator read_corpus_documents splits on.
std::string join_documents(const std::vector<std::string>& docs);

}  // namespace expe::train
