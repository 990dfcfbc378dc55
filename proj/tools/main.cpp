#include <string>
#include <vector>

#include "qdm/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return qdm::cli::run_cli(args);
}
