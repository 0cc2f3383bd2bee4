#include "provar/validation.hpp"

#include "provar/asymptotics.hpp"
#include "provar/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace provar {
namespace {

constexpr EstimatorTag kAllEstimators[] = {EstimatorTag::unadjusted, EstimatorTag::ancova1, EstimatorTag::ancova2,
                                           EstimatorTag::prognostic, EstimatorTag::prognostic_no_interaction};

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out << std::setprecision(precision) << v;
  return out.str();
}

}  // namespace

double CheckResult::margin() const { return std::min(value - lower, upper - value); }

CheckResult range_check(std::string name, double value, double lower, double upper, std::string detail) {
  CheckResult c;
  c.name = std::move(name);
  c.value = value;
  c.lower = lower;
  c.upper = upper;
  c.passed = value >= lower && value <= upper;
  c.detail = std::move(detail);
  return c;
}

bool SuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void SuiteResult::append(const SuiteResult& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

void to_json(nlohmann::json& j, const CheckResult& c) {
  j = nlohmann::json{{"name", c.name},     {"value", c.value},   {"lower", c.lower},
                     {"upper", c.upper},   {"passed", c.passed}, {"margin", c.margin()}};
  if (!c.detail.empty()) j["detail"] = c.detail;
}

void to_json(nlohmann::json& j, const SuiteResult& s) {
  j = nlohmann::json{{"suite", s.suite}, {"passed", s.passed()}, {"checks", s.checks}};
}

std::string render_suite(const SuiteResult& s) {
  std::ostringstream out;
  out << s.suite << ": " << (s.passed() ? "PASS" : "FAIL") << '\n';
  for (const auto& c : s.checks) {
    out << "  [" << (c.passed ? "pass" : "FAIL") << "] " << c.name << " = " << fmt(c.value, 6) << " in ["
        << fmt(c.lower, 6) << ", " << fmt(c.upper, 6) << "], margin " << fmt(c.margin(), 3);
    if (!c.detail.empty()) out << " (" << c.detail << ')';
    out << '\n';
  }
  return out.str();
}

std::string_view to_string(ValidationSuite suite) {
  switch (suite) {
    case ValidationSuite::formulas:
      return "formulas";
    case ValidationSuite::coverage:
      return "coverage";
    case ValidationSuite::efficiency:
      return "efficiency";
  }
  throw ValidationError("unknown validation suite");
}

ValidationSuite parse_validation_suite(std::string_view name) {
  if (name == "formulas") return ValidationSuite::formulas;
  if (name == "coverage") return ValidationSuite::coverage;
  if (name == "efficiency") return ValidationSuite::efficiency;
  throw ValidationError("unknown validation suite '" + std::string(name) +
                        "' (expected formulas, coverage or efficiency)");
}

std::vector<LinearGaussianDgp> formula_dgps() {
  LinearGaussianDgp one;
  one.pi1 = 0.3;
  one.sigma_x = Matrix::Constant(1, 1, 2.0);
  one.beta0 = Vector::Constant(1, 1.0);
  one.beta1 = Vector::Constant(1, 2.0);
  one.intercept1 = 0.5;
  one.noise0 = 1.0;
  one.noise1 = 1.5;

  LinearGaussianDgp three;
  three.pi1 = 0.6;
  three.sigma_x.resize(3, 3);
  three.sigma_x << 1.0, 0.4, -0.2,  //
      0.4, 2.0, 0.3,                //
      -0.2, 0.3, 0.5;
  three.beta0.resize(3);
  three.beta0 << 1.0, -0.5, 0.3;
  three.beta1.resize(3);
  three.beta1 << 0.2, 1.0, -1.0;
  three.intercept0 = 1.0;
  three.intercept1 = 2.0;
  three.noise0 = 0.8;
  three.noise1 = 1.2;
  return {one, three};
}

LinearGaussianDgp counterexample_dgp() {
  LinearGaussianDgp d;
  d.pi1 = 5.0 / 6.0;
  d.sigma_x = Matrix::Constant(1, 1, 1.0);
  d.beta0 = Vector::Constant(1, 1.0);
  d.beta1 = Vector::Constant(1, 4.0);
  d.noise0 = 1.0;
  d.noise1 = 1.0;
  return d;
}

PopulationParams counterexample_params() {
  PopulationParams p;
  p.pi1 = 5.0 / 6.0;
  p.sigma0 = 1.0;
  p.sigma1 = 1.0;
  p.sigma_x = Matrix::Constant(1, 1, 1.0);
  p.xi0 = Vector::Constant(1, 1.0);
  p.xi1 = Vector::Constant(1, 4.0);
  return p;
}

double nonsense_score(std::span<const double> x) {
  double h = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) h += std::sin(7.3 * x[j] + 1.7 * static_cast<double>(j));
  return std::cos(11.0 * h) + (x.empty() ? 0.0 : std::abs(x.back() - 0.3));
}

ScenarioSpec constant_effect_scenario() {
  ScenarioSpec s;
  s.name = "Constant Effect";
  s.dims = 3;
  s.hist = {0.5, 1.0, 0.0};
  s.control = {0.5, 1.0, 0.0};
  s.treated = {0.5, 1.0, 1.0};
  s.noise_sd = 1.0;
  return s;
}

SuiteResult run_formulas_suite(const ValidationConfig& config) {
  SuiteResult suite{"formulas", {}};
  const EstimatorTag tags[] = {EstimatorTag::unadjusted, EstimatorTag::ancova1, EstimatorTag::ancova2};
  const auto dgps = formula_dgps();
  for (std::size_t d = 0; d < dgps.size(); ++d) {
    const auto checks = mc_variance_check(dgps[d], tags, config.formula_n, config.formula_reps,
                                          derive_seed(config.seed, {1, d}), config.workers);
    for (const auto& c : checks) {
      suite.checks.push_back(range_check("p=" + std::to_string(dgps[d].beta0.size()) + " " +
                                             std::string(to_string(c.tag)) + " variance ratio",
                                         c.ratio, 0.9, 1.1,
                                         "empirical " + fmt(c.empirical) + " vs formula " + fmt(c.formula) +
                                             ", ratio se " + fmt(c.ratio_se, 2)));
    }
  }

  const PopulationParams ce = counterexample_params();
  const double gap = avar_ancova1(ce) - avar_unadjusted(ce);
  suite.checks.push_back(range_check("counterexample ancova1 - unadjusted", gap, 12.6 - 1e-9, 12.6 + 1e-9));

  const EstimatorTag pair[] = {EstimatorTag::unadjusted, EstimatorTag::ancova1};
  const auto mc = mc_variance_check(counterexample_dgp(), pair, config.formula_n, config.formula_reps,
                                    derive_seed(config.seed, {2}), config.workers);
  const double diff = mc[1].empirical - mc[0].empirical;
  const double se = std::hypot(mc[0].empirical_se, mc[1].empirical_se);
  suite.checks.push_back(range_check("counterexample MC separation (SEs)", diff / se, 2.0, HUGE_VAL,
                                     "n Var ancova1 " + fmt(mc[1].empirical) + " vs unadjusted " +
                                         fmt(mc[0].empirical)));
  return suite;
}

SuiteResult coverage_checks(std::span<const SimulationReport> reports, std::string_view label) {
  SuiteResult suite{"coverage", {}};
  for (const auto& r : reports) {
    for (const auto& s : r.estimators) {
      const std::string base = std::string(label) + " " + r.scenario + " " + std::string(to_string(s.tag));
      suite.checks.push_back(range_check(base + " coverage", s.coverage, 0.935, 0.965));
      if (r.true_tau == 0.0) suite.checks.push_back(range_check(base + " type-I", s.rejection_rate, 0.035, 0.065));
    }
  }
  return suite;
}

SuiteResult bound_checks(std::span<const SimulationReport> reports) {
  SuiteResult suite{"bound", {}};
  for (const auto& r : reports) {
    if (!r.bound) throw ValidationError("bound_checks: report for '" + r.scenario + "' carries no bound");
    const auto& s = r.at(EstimatorTag::prognostic);
    const double lower = s.variance - 2.0 * s.variance_se;
    suite.checks.push_back(range_check(r.scenario + " bound vs MC variance", r.bound->variance_bound, lower,
                                       HUGE_VAL, "MC variance " + fmt(s.variance) + " +- " + fmt(s.variance_se, 2)));
    suite.checks.push_back(range_check(r.scenario + " bound vs unadjusted", r.bound->variance_bound, 0.0,
                                       r.bound->unadjusted_variance));
  }
  return suite;
}

SuiteResult run_coverage_suite(const ValidationConfig& config) {
  SimConfig sim = config.sim;
  sim.master_seed = config.seed;
  sim.workers = config.workers;
  sim.estimators.assign(std::begin(kAllEstimators), std::end(kAllEstimators));
  sim.bound_sample_size = 0;
  const auto specs = table1();

  const auto forest_reports = run_table(specs, sim);
  SuiteResult suite = coverage_checks(forest_reports, "forest");

  std::vector<SimulationReport> nonsense;
  SimConfig ns = sim;
  ns.master_seed = derive_seed(config.seed, {3});
  for (std::size_t i = 0; i < specs.size(); ++i) {
    nonsense.push_back(run_scenario_with_scores(specs[i], ns, nonsense_score, i));
  }
  suite.append(coverage_checks(nonsense, "nonsense"));
  return suite;
}

SuiteResult run_efficiency_suite(const ValidationConfig& config) {
  SuiteResult suite{"efficiency", {}};
  const ScenarioSpec spec = constant_effect_scenario();
  SimConfig sim;
  sim.n_trial = config.efficiency_n;
  sim.n_reps = config.efficiency_reps;
  sim.master_seed = derive_seed(config.seed, {4});
  sim.workers = config.workers;
  sim.bound_sample_size = 0;
  sim.estimators.assign(std::begin(kAllEstimators), std::end(kAllEstimators));
  const MeanSurface mu0 = spec.control;
  const auto report = run_scenario_with_scores(spec, sim, [mu0](std::span<const double> x) { return mu0(x); });

  // Var(mu0(X)) by Monte Carlo; it cancels from the efficient value because
  // both arms share the same mean surface up to a shift.
  RngStream rng(config.seed, {5});
  const CounterfactualSample cf = sample_counterfactuals(spec, 200000, rng);
  Vector m(cf.x.rows());
  for (Eigen::Index i = 0; i < cf.x.rows(); ++i) {
    const Vector row = cf.x.row(i).transpose();
    m[i] = mu0(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  const double var_mu = (m.array() - m.mean()).square().mean();
  const double noise2 = spec.noise_sd * spec.noise_sd;
  const double pi1 = sim.pi1;
  const double pi0 = 1.0 - pi1;
  const double efficient = (var_mu + noise2) / pi0 + (var_mu + noise2) / pi1 - var_mu / (pi0 * pi1);

  const double n = static_cast<double>(sim.n_trial);
  const auto& prog = report.at(EstimatorTag::prognostic);
  suite.checks.push_back(range_check("prognostic n Var / efficient", n * prog.variance / efficient, 0.95, 1.05,
                                     "efficient " + fmt(efficient) + ", Var(mu0) " + fmt(var_mu)));
  for (const auto& s : report.estimators) {
    if (s.tag == EstimatorTag::prognostic) continue;
    const double se = std::hypot(s.variance_se, prog.variance_se);
    suite.checks.push_back(range_check(std::string(to_string(s.tag)) + " advantage over prognostic (SEs)",
                                       (prog.variance - s.variance) / se, -HUGE_VAL, 2.0,
                                       "n Var " + fmt(n * s.variance) + " vs " + fmt(n * prog.variance)));
  }
  return suite;
}

SuiteResult run_suite(ValidationSuite suite, const ValidationConfig& config) {
  switch (suite) {
    case ValidationSuite::formulas:
      return run_formulas_suite(config);
    case ValidationSuite::coverage:
      return run_coverage_suite(config);
    case ValidationSuite::efficiency:
      return run_efficiency_suite(config);
  }
  throw ValidationError("unknown validation suite");
}

}  // namespace provar
