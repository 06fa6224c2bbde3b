// Writes the deterministic synthetic corpus used when no book corpus is at hand.
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "expe/training/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic book-like corpus"};
  std::string out;
  expe::train::SyntheticCorpusOptions opts;
  app.add_option("-o,--out", out, "output file (documents separated by form feeds)")->required();
  app.add_option("--bytes", opts.target_bytes, "approximate total size")->capture_default_str();
  app.add_option("--seed", opts.seed, "generator seed")->capture_default_str();
  app.add_option("--min-doc", opts.min_doc_bytes, "minimum document size in bytes")->capture_default_str();
  app.add_option("--max-doc", opts.max_doc_bytes, "maximum document size in bytes")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    const auto docs = expe::train::synthetic_documents(opts);
    const auto text = expe::train::join_documents(docs);
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << text;
    std::cout << out << ": " << docs.size() << " documents, " << text.size() << " bytes\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
