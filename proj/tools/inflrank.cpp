#include <iostream>
#include <string>
#include <vector>

#include "inflrank/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return inflrank::run_cli(args, std::cout, std::cerr);
}
