#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "expe/cli/run_config.hpp"

namespace expe::cli {

inline const std::vector<std::string> kCommands{"train", "eval", "sweep", "ablate", "quantcheck"};

// Corpus used when training.corpus is empty.
std::filesystem::path sample_corpus_path();

// Runs one command. Summary lines go to `out`, progress to `log`; every
// artifact written is returned. Errors propagate as expe::Error subclasses.
std::vector<std::filesystem::path> run_command(const std::string& command, const RunConfig& cfg, std::ostream& out,
                                               std::ostream& log);

// Full command-line entry point: parses flags, runs, maps errors to exit
// codes (2 config, 3 missing data or checkpoint, 1 anything else).
int run_cli(int argc, char** argv);

}  // namespace expe::cli
