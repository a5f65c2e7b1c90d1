#include <string>
#include <vector>

#include "pdmp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pdmp::cli::run(args);
}
