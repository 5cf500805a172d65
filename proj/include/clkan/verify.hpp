#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "clkan/algebra.hpp"
#include "clkan/network.hpp"

namespace clkan {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Sign of e_a e_b found by writing out both generator lists and bubble
/// sorting them, one swap at a time, then contracting equal neighbours.
int bubble_sort_sign(const Signature& sig, std::size_t a, std::size_t b);

/// Every blade pair of `alg` against bubble_sort_sign.
CheckResult check_cayley(const Algebra& alg);

struct GradCheckSpec {
  Signature signature{0, 1, 0};
  std::vector<int> widths{2, 2, 1};
  RbfKind rbf = RbfKind::Clifford;
  NormKind norm = NormKind::NodeWise;
  GridKind grid = GridKind::Full;
  RbfDistance distance = RbfDistance::NonDegenerate;
  int points_per_dim = 2;
  std::size_t batch = 8;
  std::uint64_t seed = 1;
  double step = 1e-5;
};

struct GradCheckReport {
  std::size_t parameters = 0;
  /// max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, floor)
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Analytic batch-MSE gradients against central differences on a random
/// model with perturbed (non-default) normalisation parameters.
GradCheckReport gradient_check(const GradCheckSpec& spec, double floor = 1e-3);

/// One paper table entry: a config and the parameter count it must give.
struct ParamCountCase {
  std::string table;
  ModelConfig config;
  std::size_t expected = 0;
};
std::vector<ParamCountCase> param_count_table();

struct VerifyOptions {
  /// Negate one Cayley sign before the oracle check, to show it is caught.
  bool inject_cayley_fault = false;
};

CheckResult verify_cayley(const VerifyOptions& opts = {});
CheckResult verify_gradients();
CheckResult verify_sobol_stratification();
CheckResult verify_param_counts();

/// Runs every fast check, printing one line each; true when all pass.
bool run_verify(std::ostream& os, const VerifyOptions& opts = {});

}  // namespace clkan
