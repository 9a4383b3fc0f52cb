#include <iostream>

#include "dslite/cli.hpp"

int main(int argc, char** argv) {
  return dslite::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
