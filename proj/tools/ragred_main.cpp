#include <vector>

#include "ragred/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ragred::run_subcommand(std::move(args));
}
