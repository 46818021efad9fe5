#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bpre::acceptance {

struct Options {
  std::uint64_t seed = 1;
  int workers = 1;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  /// Measured values against their pinned tolerances.
  std::string detail;
  double seconds = 0.0;
};

/// 1..14.
std::vector<int> criterion_ids();
std::string criterion_name(int id);
CriterionResult run_criterion(int id, const Options& opts);

/// "PASS [ 9] flt: ..." on one line.
std::string format_line(const CriterionResult& r);

}  // namespace bpre::acceptance
