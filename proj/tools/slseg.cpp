#include <vector>

#include "sls/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sls::run_cli(args);
}
