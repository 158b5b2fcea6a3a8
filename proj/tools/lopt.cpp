#include <iostream>

#include "lopt/cli.hpp"

int main(int argc, char** argv) {
  return lopt::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
