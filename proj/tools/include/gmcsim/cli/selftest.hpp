#pragma once

#include <string>
#include <vector>

#include "gmcsim/cli/config.hpp"

namespace gmcsim::cli {

struct CheckResult {
  std::string name;
  bool passed;
  double measured;   // worst observed value of the checked quantity
  double threshold;  // bound it is compared against
  std::string detail;
};

/// Invariant suite over the configured device and amplifier designs. Pure
/// computation: identical input gives identical results for any worker count.
std::vector<CheckResult> run_invariant_suite(const RunConfig& cfg, unsigned workers);

}  // namespace gmcsim::cli
