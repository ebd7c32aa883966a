#include <iostream>
#include <string>
#include <vector>

#include "dllap/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dllap::cli::run(std::move(args), std::cout, std::cerr);
}
