#pragma once

#include "provar/simulation.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace provar {

/// One pass/fail check: `value` must lie in [lower, upper].
struct CheckResult {
  std::string name;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool passed = false;
  std::string detail;

  /// Distance to the nearest bound; negative when failing.
  double margin() const;
};

CheckResult range_check(std::string name, double value, double lower, double upper, std::string detail = {});

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
  void append(const SuiteResult& other);
};

void to_json(nlohmann::json& j, const CheckResult& c);
void to_json(nlohmann::json& j, const SuiteResult& s);
std::string render_suite(const SuiteResult& s);

enum class ValidationSuite { formulas, coverage, efficiency };

std::string_view to_string(ValidationSuite suite);
ValidationSuite parse_validation_suite(std::string_view name);

struct ValidationConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t formula_n = 2000;
  std::size_t formula_reps = 5000;
  /// Used by the coverage suite (built-in scenarios, every estimator).
  SimConfig sim = SimConfig::desk();
  std::size_t efficiency_n = 1000;
  std::size_t efficiency_reps = 10000;
};

/// Linear-Gaussian designs with one and three covariates.
std::vector<LinearGaussianDgp> formula_dgps();

/// pi1 = 5/6, xi0 = 1, xi1 = 4, Sigma_x = 1, with sigma0 and sigma1 large
/// enough to be a valid joint law.
LinearGaussianDgp counterexample_dgp();

/// The counterexample moments with sigma0 = sigma1 = 1 (formula only).
PopulationParams counterexample_params();

/// Deliberately meaningless prognostic score.
double nonsense_score(std::span<const double> x);

/// dims = 3, identical quadratic surfaces in both arms shifted by 1.
ScenarioSpec constant_effect_scenario();

SuiteResult run_formulas_suite(const ValidationConfig& config);
SuiteResult run_coverage_suite(const ValidationConfig& config);
SuiteResult run_efficiency_suite(const ValidationConfig& config);
SuiteResult run_suite(ValidationSuite suite, const ValidationConfig& config);

/// Coverage in [93.5, 96.5]% for every estimator, and rejection rate in
/// [3.5, 6.5]% wherever the true effect is zero.
SuiteResult coverage_checks(std::span<const SimulationReport> reports, std::string_view label);

/// Bound >= Monte Carlo variance of the prognostic estimator (2 SEs) and
/// bound <= the unadjusted variance, per scenario.
SuiteResult bound_checks(std::span<const SimulationReport> reports);

}  // namespace provar
