#include <iostream>

#include "frwkv/cli.hpp"

int main(int argc, char** argv) {
  return frwkv::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
