// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "oracles.hpp"

#include "provar/asymptotics.hpp"
#include "provar/estimators.hpp"
#include "provar/ols.hpp"
#include "provar/parallel.hpp"
#include "provar/rng.hpp"
#include "provar/simulation.hpp"
#include "provar/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace provar;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Verdict {
  int id;
  bool passed;
  std::string summary;
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

Verdict from_suite(int id, const SuiteResult& s, const std::string& what) {
  std::cout << render_suite(s);
  int failed = 0;
  for (const auto& c : s.checks) failed += !c.passed;
  return {id, s.passed(), what + " (" + std::to_string(s.checks.size() - failed) + "/" +
                              std::to_string(s.checks.size()) + " checks)"};
}

SuiteResult filter(const SuiteResult& s, bool counterexample) {
  SuiteResult out{s.suite, {}};
  for (const auto& c : s.checks) {
    if ((c.name.rfind("counterexample", 0) == 0) == counterexample) out.checks.push_back(c);
  }
  return out;
}

PopulationParams random_params(RngStream& rng) {
  const auto p = static_cast<Eigen::Index>(1 + rng.below(4));
  const Matrix c = oracle::random_spd(p + 3, rng, 0.05, 4.0);
  PopulationParams out;
  out.pi1 = rng.uniform(0.05, 0.95);
  out.sigma_x = c.topLeftCorner(p, p);
  out.xi0 = c.block(0, p + 1, p, 1);
  out.xi1 = c.block(0, p + 2, p, 1);
  out.sigma0 = std::sqrt(c(p + 1, p + 1));
  out.sigma1 = std::sqrt(c(p + 2, p + 2));
  ScoreMoments s;
  s.zeta = c.block(0, p, p, 1);
  s.sigma_m = std::sqrt(c(p, p));
  s.xi0m = c(p, p + 1);
  s.xi1m = c(p, p + 2);
  out.score = s;
  return out;
}

double mse(const SimulationReport& r, EstimatorTag t) { return r.at(t).mse; }

const SimulationReport& find(const std::vector<SimulationReport>& reports, const std::string& name) {
  for (const auto& r : reports) {
    if (r.scenario == name) return r;
  }
  std::cerr << "no scenario named " << name << '\n';
  std::exit(1);
}

Verdict ordering(const std::vector<SimulationReport>& reports, double minutes) {
  bool ok = true;
  std::string worst;
  double worst_ratio = 0.0;
  for (const auto& r : reports) {
    const double ratio = mse(r, EstimatorTag::prognostic) / mse(r, EstimatorTag::ancova2);
    const bool strong = r.scenario == "Baseline" || r.scenario == "Strong Effect" || r.scenario == "Surrogate Outcome";
    const bool row_ok = ratio <= 1.05 && (!strong || ratio < 0.6);
    std::cout << "  " << std::left << std::setw(22) << r.scenario << " prognostic/ancova2 MSE = " << num(ratio)
              << " (limit " << (strong ? "< 0.6" : "<= 1.05") << ") " << (row_ok ? "ok" : "FAIL") << '\n';
    ok = ok && row_ok;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst = r.scenario;
    }
  }
  return {1, ok, "MSE ordering over " + std::to_string(reports.size()) + " scenarios, largest ratio " +
                     num(worst_ratio) + " (" + worst + "), table took " + num(minutes, 3) + " min"};
}

Verdict magnitudes(const std::vector<SimulationReport>& reports) {
  const double base = mse(find(reports, "Baseline"), EstimatorTag::prognostic);
  const bool base_ok = base >= 0.012 && base <= 0.027;

  const auto& lin = find(reports, "Linear");
  const double m[] = {mse(lin, EstimatorTag::ancova2), mse(lin, EstimatorTag::prognostic),
                      mse(lin, EstimatorTag::prognostic_no_interaction)};
  const double lin_spread = *std::max_element(std::begin(m), std::end(m)) / *std::min_element(std::begin(m), std::end(m));
  const bool lin_ok = lin_spread <= 1.15;

  const auto& shift = find(reports, "Covariate Shift");
  const double shift_ratio = mse(shift, EstimatorTag::prognostic) / mse(shift, EstimatorTag::ancova2);
  const bool shift_ok = std::abs(shift_ratio - 1.0) <= 0.15;

  std::cout << "  Baseline prognostic MSE " << num(base) << " in [0.012, 0.027] " << (base_ok ? "ok" : "FAIL") << '\n'
            << "  Linear adjusted MSEs " << num(m[0]) << ", " << num(m[1]) << ", " << num(m[2]) << " max/min "
            << num(lin_spread) << " <= 1.15 " << (lin_ok ? "ok" : "FAIL") << '\n'
            << "  Covariate Shift prognostic/ancova2 " << num(shift_ratio) << " within 15% "
            << (shift_ok ? "ok" : "FAIL") << '\n';
  return {2, base_ok && lin_ok && shift_ok,
          "Baseline " + num(base) + ", Linear spread " + num(lin_spread) + ", Covariate Shift ratio " +
              num(shift_ratio)};
}

Verdict score_reduction() {
  RngStream rng(derive_seed(kSeed, {50}));
  double worst = 0.0;
  double min_reduction = HUGE_VAL;
  int bad = 0;
  for (int draw = 0; draw < 10000; ++draw) {
    const PopulationParams params = random_params(rng);
    const double reduction = avar_reduction_from_score(params);
    const double direct = avar_ancova2(params) - avar_ancova2(params.with_score_as_covariate());
    const double err = std::abs(reduction - direct);
    worst = std::max(worst, err);
    min_reduction = std::min(min_reduction, reduction);
    bad += err > 1e-10 || reduction < 0.0;
  }
  return {5, bad == 0, "10000 draws, max |difference| " + num(worst, 3) + ", min reduction " + num(min_reduction, 3)};
}

Verdict numerical_oracles() {
  RngStream rng(derive_seed(kSeed, {90}));
  double coef_err = 0.0, hc0_err = 0.0, hc1_err = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const auto q = static_cast<Eigen::Index>(2 + rng.below(7));
    const auto n = static_cast<Eigen::Index>(q + 5 + rng.below(300));
    DesignMatrix d = oracle::random_design(n, q, rng);
    const double scale = std::exp(rng.uniform(-3, 3));
    d.columns.rightCols(q - 1) *= scale;
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y[i] = d.columns.row(i).sum() + (0.5 + std::abs(d.columns(i, 1)) / scale) * rng.normal();
    }

    const OlsFit fit = fit_ols(d, y);
    const Vector ref = oracle::normal_equations(d.columns, y);
    for (Eigen::Index j = 0; j < q; ++j) {
      coef_err = std::max(coef_err, std::abs(fit.coefficients[j] - ref[j]) / std::max(1.0, std::abs(ref[j])));
    }

    const Matrix loop = oracle::loop_sandwich(d.columns, y - d.columns * ref);
    const Matrix hc0 = sandwich_covariance(d, y, fit, HcFlavor::HC0).matrix;
    const Matrix hc1 = sandwich_covariance(d, y, fit, HcFlavor::HC1).matrix;
    const double k = static_cast<double>(n) / static_cast<double>(n - q);
    for (Eigen::Index a = 0; a < q; ++a) {
      for (Eigen::Index b = 0; b < q; ++b) {
        const double denom = std::max(1.0, std::abs(loop(a, b)));
        hc0_err = std::max(hc0_err, std::abs(hc0(a, b) - loop(a, b)) / denom);
        hc1_err = std::max(hc1_err, std::abs(hc1(a, b) - k * loop(a, b)) / (k * denom));
      }
    }
  }
  const bool ok = coef_err <= 1e-8 && hc0_err <= 1e-8 && hc1_err <= 1e-8;
  return {9, ok, "100 instances, max error coefficients " + num(coef_err, 3) + ", HC0 " + num(hc0_err, 3) + ", HC1 " +
                     num(hc1_err, 3) + " (limit 1e-8)"};
}

}  // namespace

int main() {
  const std::size_t workers = default_workers();
  std::cout << "seed " << kSeed << ", workers " << workers << "\n\n";
  std::vector<Verdict> verdicts;

  SimConfig sim = SimConfig::desk();
  sim.master_seed = kSeed;
  sim.workers = workers;
  sim.estimators = {EstimatorTag::unadjusted, EstimatorTag::ancova1, EstimatorTag::ancova2, EstimatorTag::prognostic,
                    EstimatorTag::prognostic_no_interaction};
  const auto specs = table1();
  const auto start = std::chrono::steady_clock::now();
  const auto reports = run_table(specs, sim);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  std::cout << render_table(reports) << '\n';

  std::cout << "[1] ordering\n";
  verdicts.push_back(ordering(reports, minutes));
  std::cout << "[2] magnitudes\n";
  verdicts.push_back(magnitudes(reports));

  ValidationConfig vc;
  vc.seed = kSeed;
  vc.workers = workers;
  const SuiteResult formulas = run_formulas_suite(vc);
  std::cout << "[3] ";
  verdicts.push_back(from_suite(3, filter(formulas, false), "n Var(tau_hat) vs closed forms within 10%"));
  std::cout << "[4] ";
  verdicts.push_back(from_suite(4, filter(formulas, true), "gap = 12.6 and Monte Carlo separation >= 2 SE"));

  std::cout << "[5] score reduction identity\n";
  verdicts.push_back(score_reduction());

  std::cout << "[6] ";
  verdicts.push_back(from_suite(6, bound_checks(reports), "variance bound conservative and below unadjusted"));

  std::cout << "[7] ";
  verdicts.push_back(from_suite(7, run_efficiency_suite(vc), "constant-effect efficiency"));

  SimConfig ns = sim;
  ns.master_seed = derive_seed(kSeed, {3});
  ns.bound_sample_size = 0;
  std::vector<SimulationReport> nonsense;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    nonsense.push_back(run_scenario_with_scores(specs[i], ns, nonsense_score, i));
  }
  SuiteResult coverage = coverage_checks(reports, "forest");
  coverage.append(coverage_checks(nonsense, "nonsense"));
  std::cout << "[8] ";
  verdicts.push_back(from_suite(8, coverage, "coverage and type-I error, forest and nonsense scores"));

  std::cout << "[9] numerical oracles\n";
  verdicts.push_back(numerical_oracles());

  std::cout << '\n';
  bool all = true;
  for (const auto& v : verdicts) {
    std::cout << "criterion " << v.id << ": " << (v.passed ? "PASS" : "FAIL") << "  " << v.summary << '\n';
    all = all && v.passed;
  }
  return all ? 0 : 1;
}
