#pragma once

// Numbered acceptance criteria; each prints one PASS/FAIL line.

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace rdyn::acceptance {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
};

inline constexpr int kCriteria = 10;

CriterionResult run_criterion(int id);

// Runs 1..10 in order, one line per criterion. Returns true when all pass.
bool run_all(std::ostream& out);

void print(std::ostream& out, const CriterionResult& r);

// The tilted-chain scenario used by criterion 10 and configs/bloch.json.
nlohmann::json bloch_scenario();

}  // namespace rdyn::acceptance
