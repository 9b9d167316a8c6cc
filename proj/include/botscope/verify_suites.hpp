#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

// Oracle-equivalence suites behind `botscope verify`.
namespace botscope::verify {

struct VerifyOptions {
  std::size_t m = 30;            // hosts / matrix order upper bound
  std::size_t slides = 200;      // chained slides in the drift suites
  std::size_t matrices = 100;    // random matrices for the Lanczos suites
  std::size_t tridiagonals = 200;
  std::uint64_t seed = 1;
  bool inject_fault = false;  // drop the mean-shift term of the correlation update
};

struct SuiteResult {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  bool skipped = false;
  std::string note;
};

std::vector<SuiteResult> run_all(const VerifyOptions& options);

SuiteResult corr_drift_suite(const VerifyOptions& options, std::size_t reanchor_period, double tolerance);
SuiteResult theorem1_suite(const VerifyOptions& options);
SuiteResult theorem2_suite(const VerifyOptions& options);
SuiteResult sturm_suite(const VerifyOptions& options);
SuiteResult convergence_suite(const VerifyOptions& options);
SuiteResult agreement_suite(const VerifyOptions& options);

void print_report(const std::vector<SuiteResult>& results, std::ostream& out);
bool all_passed(const std::vector<SuiteResult>& results);

}  // namespace botscope::verify
