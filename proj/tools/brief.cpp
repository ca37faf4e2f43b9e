#include <iostream>
#include <string>
#include <vector>

#include "brief/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return brief::run_cli(args, std::cout, std::cerr).exit_code;
}
