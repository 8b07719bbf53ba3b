#include <iostream>
#include <string>
#include <vector>

#include "advstego/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return advstego::cli_dispatch(args, std::cout, std::cerr);
}
