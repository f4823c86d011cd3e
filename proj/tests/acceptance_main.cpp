#include <cstdlib>
#include <iostream>
#include <string>

#include "rdyn/acceptance.hpp"

// rdyn_acceptance [id ...]; no arguments runs every criterion.
int main(int argc, char** argv) {
  using namespace rdyn::acceptance;
  if (argc == 1) return run_all(std::cout) ? EXIT_SUCCESS : EXIT_FAILURE;
  bool all = true;
  for (int i = 1; i < argc; ++i) {
    const CriterionResult r = run_criterion(std::stoi(argv[i]));
    print(std::cout, r);
    all = all && r.pass;
  }
  return all ? EXIT_SUCCESS : EXIT_FAILURE;
}
