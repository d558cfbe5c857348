#pragma once

// Property and oracle suites run by `pdd verify`. Every check uses fixed seeds.

#include <string>
#include <vector>

namespace pdd::verify {

struct CheckResult {
  std::string id;      // "<suite>/<property>"
  bool passed = false;
  std::string detail;  // measured value against its tolerance, or the exception text
  double seconds = 0.0;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  int failures() const;
};

/// numerics, pdd-core, multicast, relay, volmin.
const std::vector<std::string>& suite_names();

/// Runs one suite. Throws InvalidInput for an unknown name.
SuiteReport run_suite(const std::string& name);

/// "all" runs every suite once, in suite_names() order.
std::vector<SuiteReport> run(const std::string& name);

}  // namespace pdd::verify
