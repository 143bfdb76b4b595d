#include <iostream>

#include "macrocast/cli.hpp"

int main(int argc, char** argv) {
  return macrocast::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
