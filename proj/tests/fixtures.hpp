#pragma once

// Small models and corpora shared by the unit tests.

#include <filesystem>
#include <string>
#include <vector>

#include "expe/numerics/ops.hpp"
#include "expe/numerics/rng.hpp"
#include "expe/transformer/config.hpp"

namespace fixture {

inline expe::pos::EncodingScheme scheme(expe::pos::SchemeKind kind, std::size_t width, std::size_t max_len) {
  namespace pos = expe::pos;
  pos::EncodingScheme s;
  switch (kind) {
    case pos::SchemeKind::expe: s.params = pos::ExpeParams{0.0, 1.0 / 16, width, 1.0}; break;
    case pos::SchemeKind::exqpe: s.params = pos::ExqpeParams{0.0, 1.0 / 16, 1.0 / 16, width, 1.0}; break;
    case pos::SchemeKind::rope: s.params = pos::RopeParams{}; break;
    case pos::SchemeKind::sinusoidal: s.params = pos::SinusoidalParams{}; break;
    case pos::SchemeKind::learned_absolute: s.params = pos::LearnedAbsoluteParams{max_len}; break;
  }
  return s;
}

// seq 8, d 32, 2 heads, 2 layers, no dropout.
inline expe::nn::ModelConfig tiny_model(expe::pos::SchemeKind kind = expe::pos::SchemeKind::expe) {
  expe::nn::ModelConfig c;
  c.seq_len = 8;
  c.d_model = 32;
  c.n_heads = 2;
  c.head_size = 16;
  c.n_layers = 2;
  c.ffn_hidden = 64;
  c.dropout = 0.0;
  c.encoding = scheme(kind, 4, 8);
  return c;
}

inline std::vector<expe::num::TokenId> random_tokens(std::size_t n, expe::num::Rng& rng, std::size_t vocab = 257) {
  std::vector<expe::num::TokenId> t(n);
  for (auto& x : t) x = static_cast<expe::num::TokenId>(rng.below(vocab));
  return t;
}

// Pseudo-random printable text; every document differs.
inline std::vector<std::string> random_documents(std::size_t count, std::size_t bytes, std::uint64_t seed) {
  expe::num::Rng rng(seed);
  std::vector<std::string> docs(count);
  for (auto& d : docs) {
    d.resize(bytes);
    for (auto& c : d) c = static_cast<char>('a' + rng.below(26));
  }
  return docs;
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    expe::num::Rng rng(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this));
    path_ = std::filesystem::temp_directory_path() / ("expe_" + tag + "_" + std::to_string(rng.next_u64() % 1000000));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
