#include <iostream>
#include <string>
#include <vector>

#include "ergo/cli.hpp"

int main(int argc, char** argv) {
  return ergo::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
