#pragma once

// Self-checks behind `cbonn verify`: gradient against finite differences,
// W2 against brute force, barycenter stationarity, and the consensus and
// contraction properties of the optimisers.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cbonn {

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::size_t checks = 0;
  std::size_t failures = 0;
  double worst = 0.0;      // largest observed error (suite specific)
  double tolerance = 0.0;  // bound `worst` is compared with
  std::string detail;
};

const std::vector<std::string>& verify_suites();

/// Runs one suite by name; throws std::invalid_argument for unknown names.
SuiteResult run_suite(const std::string& name, std::uint64_t seed = 7);

}  // namespace cbonn
