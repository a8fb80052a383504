#include <iostream>
#include <string>
#include <vector>

#include "phaselsq/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return phaselsq::cli::dispatch(args, std::cout, std::cerr);
}
