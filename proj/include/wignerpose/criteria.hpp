#pragma once

// Acceptance checks 1-10: each returns a pass flag, the measured values and its runtime.

#include <string>
#include <vector>

namespace wignerpose {

struct CriterionResult {
  int id{0};
  std::string name;
  bool pass{false};
  double seconds{0};
  double limit_seconds{0};
  std::string detail;
};

struct CriteriaOptions {
  bool large{false};      // also run the r = 5 inference check (about 2.4M rotations)
  std::string cache_dir;  // trained toy models are shared through here; empty uses a temporary directory
};

inline constexpr int kCriterionCount = 10;

CriterionResult check_criterion(int id, const CriteriaOptions& opt = {});
std::vector<CriterionResult> run_criteria(const std::vector<int>& ids, const CriteriaOptions& opt = {});

/// "criterion  7 PASS  toy convergence: ... [12.3 s / 900 s]"
std::string format_result(const CriterionResult& r);

}  // namespace wignerpose
