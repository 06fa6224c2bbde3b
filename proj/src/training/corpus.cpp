#include "expe/training/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "expe/error.hpp"

namespace expe::train {

namespace fs = std::filesystem;

std::pair<std::size_t, std::size_t> TokenStream::doc_range(std::size_t i) const {
  const auto begin = doc_starts.at(i);
  const auto end = i + 1 < doc_starts.size() ? doc_starts[i + 1] : tokens.size();
  return {begin, end};
}

void TokenStream::validate(std::size_t vocab_size) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= vocab_size) {
      throw DataError("stream '" + id + "': token " + std::to_string(tokens[i]) + " at " + std::to_string(i) +
                      " outside vocabulary of " + std::to_string(vocab_size));
    }
  }
  for (std::size_t i = 0; i < doc_starts.size(); ++i) {
    if (doc_starts[i] > tokens.size() || (i > 0 && doc_starts[i] < doc_starts[i - 1])) {
      throw DataError("stream '" + id + "': document boundaries unsorted or out of range");
    }
  }
}

TokenStream stream_from_documents(std::string id, const std::vector<std::string>& docs) {
  TokenStream s;
  s.id = std::move(id);
  for (const auto& d : docs) {
    s.doc_starts.push_back(s.tokens.size());
    auto ids = tokenize_bytes(d);
    s.tokens.insert(s.tokens.end(), ids.begin(), ids.end());
  }
  return s;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void split_documents(const std::string& text, std::vector<std::string>& out) {
  std::size_t begin = 0;
  while (begin <= text.size()) {
    auto end = text.find('\f', begin);
    if (end == std::string::npos) end = text.size();
    if (end > begin) out.push_back(text.substr(begin, end - begin));
    begin = end + 1;
  }
}

}  // namespace

std::vector<std::string> read_corpus_documents(const fs::path& path) {
  std::vector<std::string> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) split_documents(read_file(f), docs);
  } else if (fs::is_regular_file(path)) {
    split_documents(read_file(path), docs);
  } else {
    throw DataError("corpus not found: " + path.string());
  }
  if (docs.empty()) throw DataError("corpus " + path.string() + " contains no text");
  return docs;
}

CorpusSplit split_corpus(const std::string& id, const std::vector<std::string>& docs) {
  std::vector<std::string> train, dev, test;
  if (docs.size() >= 20) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto r = i % 20;
      (r == 18 ? dev : r == 19 ? test : train).push_back(docs[i]);
    }
  } else {
    for (const auto& d : docs) {
      const auto a = d.size() * 90 / 100;
      const auto b = d.size() * 95 / 100;
      if (a > 0) train.push_back(d.substr(0, a));
      if (b > a) dev.push_back(d.substr(a, b - a));
      if (d.size() > b) test.push_back(d.substr(b));
    }
  }
  return {stream_from_documents(id + ":train", train), stream_from_documents(id + ":dev", dev),
          stream_from_documents(id + ":test", test)};
}

CorpusSplit load_corpus(const fs::path& path) {
  return split_corpus(path.filename().string(), read_corpus_documents(path));
}

}  // namespace expe::train
