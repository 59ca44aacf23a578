// One line per acceptance criterion; exit status is non-zero if any fails.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "acceptance_suite.hpp"

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  return sensekern::acceptance::run(std::cout, only) ? EXIT_SUCCESS : EXIT_FAILURE;
}
