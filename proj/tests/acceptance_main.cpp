#include <cstdio>
#include <iostream>
#include <string>

#include "ergo/acceptance.hpp"

// One line per acceptance criterion; --json adds the full report for each.
int main(int argc, char** argv) {
  const bool verbose = argc > 1 && std::string(argv[1]) == "--json";
  int failed = 0;
  for (const auto& name : ergo::criterion_names()) {
    const ergo::CriterionReport r = ergo::run_criterion(name);
    std::printf("%s %2d %-26s %7.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                r.summary.c_str());
    if (verbose || !r.passed) std::cout << ergo::to_json(r).dump(2) << "\n";
    std::fflush(stdout);
    failed += r.passed ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
