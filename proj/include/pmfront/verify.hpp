#pragma once

#include <string>
#include <vector>

namespace pmfront::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// quick: criteria 1-5 (no simulation); full: criteria 6-10 (reference runs).
std::vector<CriterionResult> run(bool quick, bool full, bool verbose = false);

bool all_pass(const std::vector<CriterionResult>& results);

std::string render_table(const std::vector<CriterionResult>& results);

}  // namespace pmfront::verify
