#pragma once

// Numeric property suite for the simplex construction, the hypersphere
// neuron and the invariant model. Every check reports its largest residual
// against a fixed threshold.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace deh {

inline constexpr double kAlgebraicTolerance = 1e-12;
inline constexpr double kEquivarianceTolerance = 1e-9;
inline constexpr double kCommutationTolerance = 1e-10;
inline constexpr double kSinglePrecisionTolerance = 1e-5;

struct VerifyOptions {
  std::size_t n_min = 2;
  std::size_t n_max = 8;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  double perturb_change_of_basis = 0.0;  // added to M(0,0) for fault injection
};

struct CheckResult {
  std::string name;
  std::string property;
  std::string dims;
  std::size_t cases = 0;
  double max_residual = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  double wall_ms = 0.0;

  bool passed() const;
  std::vector<std::string> failures() const;
};

// Exact closed forms of the simplex vertices and change of basis for n = 2, 3, 4.
struct NumericInstance {
  std::size_t n = 0;
  std::vector<std::vector<double>> vertices;  // n x (n+1)
  std::vector<std::vector<double>> change;    // (n+1) x (n+1)
  double p = 0.0;
};
std::vector<NumericInstance> numeric_instances();

std::vector<std::string> check_names();

// Runs the suite over n in [n_min, n_max]; throws ErrorKind::config on an
// empty suite (trials == 0) or a range outside 2..12.
VerificationReport run_verification(const VerifyOptions& options);

void write_report_csv(const VerificationReport& report, std::ostream& out, bool header = true);
std::string format_report_table(const VerificationReport& report);

}  // namespace deh
