#include "ergolq/cli/commands.hpp"

int main(int argc, char** argv) {
  return ergolq::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
