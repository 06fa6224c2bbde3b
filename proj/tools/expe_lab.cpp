#include "expe/cli/commands.hpp"

int main(int argc, char** argv) { return expe::cli::run_cli(argc, argv); }
