#include "expe/training/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "expe/error.hpp"
#include "expe/numerics/rng.hpp"

namespace expe::train {

namespace {

using num::Rng;

constexpr std::array kOnsets = {"b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "v", "w",
                                "br", "ch", "cl", "dr", "gr", "pl", "sh", "st", "th", "tr", ""};
constexpr std::array kVowels = {"a", "e", "i", "o", "u", "ea", "ou", "ai", "oo", "ie"};
constexpr std::array kCodas = {"", "", "", "n", "r", "l", "s", "t", "nd", "st", "ck", "ng", "m", "rd"};

constexpr std::array kPrepositions = {"in", "on", "at", "by", "with", "from", "under", "over", "near", "into"};
constexpr std::array kConjunctions = {"and", "but", "for", "while", "because", "though"};

// Weighted draw from a Zipf(1.1) distribution over [0, n).
class Zipf {
 public:
  explicit Zipf(std::size_t n) : cdf_(n) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) cdf_[i] = total += 1.0 / std::pow(static_cast<double>(i + 1), 1.1);
    for (auto& c : cdf_) c /= total;
  }
  std::size_t draw(Rng& rng) const {
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), rng.uniform());
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

template <typename A>
const char* pick(const A& options, Rng& rng) {
  return options[rng.below(options.size())];
}

std::string make_word(Rng& rng, std::size_t min_syllables, std::size_t max_syllables) {
  const auto n = min_syllables + rng.below(max_syllables - min_syllables + 1);
  std::string w;
  for (std::size_t s = 0; s < n; ++s) {
    w += pick(kOnsets, rng);
    w += pick(kVowels, rng);
    if (s + 1 == n || rng.uniform() < 0.3) w += pick(kCodas, rng);
  }
  return w;
}

std::vector<std::string> make_lexicon(Rng& rng, std::size_t n, std::size_t lo, std::size_t hi,
                                      std::set<std::string>& used) {
  std::vector<std::string> words;
  while (words.size() < n) {
    auto w = make_word(rng, lo, hi);
    if (w.size() < 2 || !used.insert(w).second) continue;
    words.push_back(std::move(w));
  }
  return words;
}

std::string capitalised(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

std::string roman(std::size_t n) {
  static const std::array<std::pair<std::size_t, const char*>, 9> table = {
      {{50, "L"}, {40, "XL"}, {10, "X"}, {9, "IX"}, {5, "V"}, {4, "IV"}, {1, "I"}, {0, ""}, {0, ""}}};
  std::string out;
  for (const auto& [value, digits] : table) {
    while (value > 0 && n >= value) {
      out += digits;
      n -= value;
    }
  }
  return out;
}

struct Lexicon {
  std::vector<std::string> nouns, verbs, adjectives, adverbs, names;
  Zipf noun_zipf{1}, verb_zipf{1}, adj_zipf{1}, adv_zipf{1};
};

Lexicon build_lexicon(Rng& rng) {
  std::set<std::string> used;
  Lexicon lex;
  lex.nouns = make_lexicon(rng, 900, 1, 3, used);
  lex.verbs = make_lexicon(rng, 400, 1, 2, used);
  lex.adjectives = make_lexicon(rng, 300, 1, 3, used);
  lex.adverbs = make_lexicon(rng, 80, 2, 3, used);
  for (auto& a : lex.adverbs) a += "ly";
  lex.names = make_lexicon(rng, 400, 2, 3, used);
  for (auto& n : lex.names) n = capitalised(n);
  lex.noun_zipf = Zipf(lex.nouns.size());
  lex.verb_zipf = Zipf(lex.verbs.size());
  lex.adj_zipf = Zipf(lex.adjectives.size());
  lex.adv_zipf = Zipf(lex.adverbs.size());
  return lex;
}

// Per-document state: a cast of characters and a set of topic nouns that
// recur far more often than their global frequency.
struct DocState {
  std::vector<std::string> cast;
  std::vector<std::string> topics;
  std::string place;
};

class Writer {
 public:
  Writer(const Lexicon& lex, const DocState& doc, Rng& rng) : lex_(lex), doc_(doc), rng_(rng) {}

  std::string noun() {
    if (rng_.uniform() < 0.25) return doc_.topics[rng_.below(doc_.topics.size())];
    return lex_.nouns[lex_.noun_zipf.draw(rng_)];
  }
  std::string plural_noun() { return noun() + "s"; }
  std::string verb_past() { return lex_.verbs[lex_.verb_zipf.draw(rng_)] + "ed"; }
  std::string verb() { return lex_.verbs[lex_.verb_zipf.draw(rng_)]; }
  std::string adjective() { return lex_.adjectives[lex_.adj_zipf.draw(rng_)]; }
  std::string adverb() { return lex_.adverbs[lex_.adv_zipf.draw(rng_)]; }
  std::string name() {
    // Earlier cast members are the protagonists and appear most often.
    const auto i = std::min(rng_.below(doc_.cast.size()), rng_.below(doc_.cast.size()));
    return doc_.cast[i];
  }
  std::string noun_phrase() {
    switch (rng_.below(5)) {
      case 0: return "the " + noun();
      case 1: return "the " + adjective() + " " + noun();
      case 2: return "a " + noun();
      case 3: return "the " + noun() + " of " + name();
      default: return "the " + plural_noun();
    }
  }

  std::string clause() {
    switch (rng_.below(8)) {
      case 0: return name() + " " + verb_past() + " " + noun_phrase();
      case 1: return noun_phrase() + " was " + adjective();
      case 2: return name() + " " + verb_past() + " " + adverb() + " " + pick(kPrepositions, rng_) + " " + noun_phrase();
      case 3: return "there was " + noun_phrase() + " " + pick(kPrepositions, rng_) + " " + doc_.place;
      case 4: {
        const auto a = name();
        auto b = name();
        while (b == a) b = doc_.cast[rng_.below(doc_.cast.size())];
        return a + " and " + b + " " + verb_past() + " " + noun_phrase();
      }
      case 5: return "it was " + adjective() + " to " + verb() + " " + noun_phrase();
      case 6: return noun_phrase() + " had " + verb_past() + " " + pick(kPrepositions, rng_) + " " + noun_phrase();
      default: return "he " + verb_past() + " " + noun_phrase() + " " + adverb();
    }
  }

  std::string sentence() {
    std::string s;
    const auto kind = rng_.below(10);
    if (kind < 6) {
      s = capitalised(clause()) + ".";
    } else if (kind < 8) {
      s = capitalised(clause()) + ", " + pick(kConjunctions, rng_) + " " + clause() + ".";
    } else if (kind < 9) {
      s = "\"" + capitalised(clause()) + (rng_.uniform() < 0.3 ? "?" : ".") + "\" said " + name() + ".";
    } else {
      s = "\"" + capitalised(clause()) + ",\" " + name() + " " + verb_past() + ", \"" + clause() + ".\"";
    }
    return s;
  }

 private:
  const Lexicon& lex_;
  const DocState& doc_;
  Rng& rng_;
};

void append_wrapped(std::string& out, const std::string& paragraph, std::size_t width) {
  std::size_t line = 0;
  std::size_t begin = 0;
  while (begin < paragraph.size()) {
    auto end = paragraph.find(' ', begin);
    if (end == std::string::npos) end = paragraph.size();
    const auto word = std::string_view(paragraph).substr(begin, end - begin);
    if (line > 0 && line + 1 + word.size() > width) {
      out += '\n';
      line = 0;
    } else if (line > 0) {
      out += ' ';
      ++line;
    }
    out += word;
    line += word.size();
    begin = end + 1;
  }
}

std::string make_document(const Lexicon& lex, std::size_t index, std::size_t target, std::size_t width, Rng& rng) {
  DocState doc;
  const auto cast_size = 4 + rng.below(5);
  while (doc.cast.size() < cast_size) {
    auto n = lex.names[rng.below(lex.names.size())];
    if (std::find(doc.cast.begin(), doc.cast.end(), n) == doc.cast.end()) doc.cast.push_back(std::move(n));
  }
  for (std::size_t i = 0; i < 12; ++i) doc.topics.push_back(lex.nouns[rng.below(lex.nouns.size())]);
  doc.place = capitalised(lex.nouns[rng.below(lex.nouns.size())]) + capitalised(make_word(rng, 1, 1));

  Writer w(lex, doc, rng);
  std::string text = "THE " + capitalised(w.adjective()) + " " + capitalised(doc.topics[0]) + "\n\nBook " +
                     std::to_string(index + 1) + "\n\n";
  std::size_t chapter = 0;
  while (text.size() < target) {
    text += "CHAPTER " + roman(++chapter) + ".\n\n";
    const auto paragraphs = 6 + rng.below(10);
    for (std::size_t p = 0; p < paragraphs && text.size() < target; ++p) {
      std::string para;
      const auto sentences = 2 + rng.below(7);
      for (std::size_t s = 0; s < sentences; ++s) {
        if (s) para += ' ';
        para += w.sentence();
      }
      append_wrapped(text, para, width);
      text += "\n\n";
    }
  }
  return text;
}

}  // namespace

std::vector<std::string> synthetic_documents(const SyntheticCorpusOptions& opts) {
  if (opts.min_doc_bytes == 0 || opts.max_doc_bytes < opts.min_doc_bytes) {
    throw ConfigError("synthetic corpus: need 0 < min_doc_bytes <= max_doc_bytes");
  }
  if (opts.line_width < 20) throw ConfigError("synthetic corpus: line_width must be at least 20");
  Rng rng(num::mix_seed(opts.seed, 0x5eed));
  const auto lex = build_lexicon(rng);
  std::vector<std::string> docs;
  std::size_t total = 0;
  while (total < opts.target_bytes) {
    const auto target = opts.min_doc_bytes + rng.below(opts.max_doc_bytes - opts.min_doc_bytes + 1);
    docs.push_back(make_document(lex, docs.size(), target, opts.line_width, rng));
    total += docs.back().size();
  }
  return docs;
}

std::string join_documents(const std::vector<std::string>& docs) {
  std::string out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i) out += '\f';
    out += docs[i];
  }
  return out;
}

}  // namespace expe::train
