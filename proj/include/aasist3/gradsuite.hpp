#pragma once

// Finite-difference battery over every layer family, on small seeded
// shapes. Used by the gradcheck CLI command and the acceptance suite.

#include <string>
#include <vector>

namespace aasist3 {

struct GradCheckResult {
  std::string layer;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// module_filter: "" for everything, else one of kan | graph | encoder |
// model | train.
std::vector<GradCheckResult> run_grad_suite(const std::string& module_filter = "");

bool all_passed(const std::vector<GradCheckResult>& results);

}  // namespace aasist3
