#pragma once

#include "provar/asymptotics.hpp"
#include "provar/dataset.hpp"
#include "provar/estimators.hpp"
#include "provar/prognostic.hpp"
#include "provar/rng.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace provar {

/// Quadratic-mean surface a (sum x)^2 + b (sum x) + c.
struct MeanSurface {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double operator()(std::span<const double> x) const;
};

/// One simulation scenario: covariates uniform on a prism, Gaussian
/// outcomes around quadratic-mean surfaces.
struct ScenarioSpec {
  std::string name;
  double hist_low = -1.0;
  double hist_high = 1.0;
  double trial_low = -1.0;
  double trial_high = 1.0;
  MeanSurface hist;
  MeanSurface control;
  MeanSurface treated;
  int dims = 10;
  double noise_sd = 1.0;

  void validate() const;
  /// E[Y_1 - Y_0] under the trial covariate law.
  double true_tau() const;
};

void to_json(nlohmann::json& j, const ScenarioSpec& s);
void from_json(const nlohmann::json& j, ScenarioSpec& s);

/// The six built-in scenarios: Baseline, Strong Effect, Linear,
/// Heterogeneous Effect, Surrogate Outcome, Covariate Shift.
std::vector<ScenarioSpec> table1();

/// E[(sum of d iid U(l, h))^k] for k = 1, 2.
double uniform_sum_mean(int dims, double low, double high);
double uniform_sum_second_moment(int dims, double low, double high);

enum class Assignment {
  /// Exactly round(n pi1) treated, chosen by random permutation.
  exact_split,
  /// Independent Bernoulli(pi1) per subject.
  bernoulli,
};

HistoricalDataset sample_historical(const ScenarioSpec& spec, std::size_t n, RngStream& rng);

struct TrialDraw {
  TrialDataset trial;
  double true_tau;
};

TrialDraw sample_trial(const ScenarioSpec& spec, std::size_t n, double pi1, RngStream& rng,
                       Assignment assignment = Assignment::exact_split);

/// Draws the trial population with both potential outcomes, for moments.
struct CounterfactualSample {
  Matrix x;
  Vector y0;
  Vector y1;
};
CounterfactualSample sample_counterfactuals(const ScenarioSpec& spec, std::size_t n, RngStream& rng);

struct SimConfig {
  std::size_t n_hist = 5000;
  std::size_t n_trial = 500;
  double pi1 = 0.5;
  std::size_t n_reps = 2000;
  ForestHyperparams forest{200, 1, true, 0};
  std::uint64_t master_seed = 0;
  std::vector<EstimatorTag> estimators{EstimatorTag::unadjusted, EstimatorTag::ancova2, EstimatorTag::prognostic,
                                       EstimatorTag::prognostic_no_interaction};
  bool retrain_per_rep = false;
  Assignment assignment = Assignment::exact_split;
  double alpha = 0.05;
  HcFlavor flavor = HcFlavor::HC0;
  std::size_t workers = 1;
  /// Counterfactual draws used for the score-outcome moments behind the
  /// variance bound; 0 disables the bound.
  std::size_t bound_sample_size = 20000;
  /// Largest tolerated fraction of failed replicates per estimator.
  double max_failure_fraction = 0.001;

  void validate() const;
  /// 2000 reps, 200 trees, 5000 historical rows.
  static SimConfig desk();
  /// 10000 reps, 1000 trees, 10000 historical rows.
  static SimConfig full();
};

void to_json(nlohmann::json& j, const SimConfig& c);

struct EstimatorSummary {
  EstimatorTag tag = EstimatorTag::unadjusted;
  std::size_t n_ok = 0;
  std::size_t failures = 0;
  double mean_tau_hat = 0.0;
  double bias = 0.0;
  /// Empirical variance of tau_hat (1/R normalisation, so mse = bias^2 + variance).
  double variance = 0.0;
  /// Monte Carlo standard error of `variance`.
  double variance_se = 0.0;
  double mse = 0.0;
  double mean_estimated_variance = 0.0;
  double coverage = 0.0;
  double rejection_rate = 0.0;
};

/// Variance bound evaluated at population moments of the fitted score.
struct BoundCheck {
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double rho0 = 0.0;
  double rho1 = 0.0;
  /// Bound on Var(tau_hat) at n_trial.
  double variance_bound = 0.0;
  /// (sigma0^2/pi0 + sigma1^2/pi1) / n_trial.
  double unadjusted_variance = 0.0;
};

struct SimulationReport {
  std::string scenario;
  double true_tau = 0.0;
  std::size_t n_reps = 0;
  std::size_t n_trial = 0;
  std::vector<EstimatorSummary> estimators;
  std::optional<BoundCheck> bound;

  const EstimatorSummary& at(EstimatorTag tag) const;
};

void to_json(nlohmann::json& j, const SimulationReport& r);

/// Per-replicate estimates; NaN marks a failed fit.
struct ReplicateResult {
  std::vector<double> tau_hat;
  std::vector<double> std_error;
};

/// Aggregates replicate results in replicate order.
std::vector<EstimatorSummary> summarize(std::span<const EstimatorTag> tags, std::span<const ReplicateResult> reps,
                                        double true_tau, double alpha);

using ScoreFunction = std::function<double(std::span<const double>)>;

/// Trains the forest once on a historical draw (or per replicate when
/// configured) and runs every configured estimator on n_reps trials.
/// Deterministic given master_seed and scenario_index for any worker count.
SimulationReport run_scenario(const ScenarioSpec& spec, const SimConfig& config, std::size_t scenario_index = 0);

/// Same harness with a fixed, caller-supplied score function.
SimulationReport run_scenario_with_scores(const ScenarioSpec& spec, const SimConfig& config,
                                          const ScoreFunction& score, std::size_t scenario_index = 0);

std::vector<SimulationReport> run_table(std::span<const ScenarioSpec> specs, const SimConfig& config);

/// Scenario x estimator MSE table as aligned text.
std::string render_table(const std::vector<SimulationReport>& reports);

/// Linear-Gaussian trial with known population parameters:
/// X ~ N(0, sigma_x), Y_w = intercept_w + beta_w' X + N(0, noise_w^2).
struct LinearGaussianDgp {
  double pi1 = 0.5;
  Matrix sigma_x;
  Vector beta0;
  Vector beta1;
  double intercept0 = 0.0;
  double intercept1 = 0.0;
  double noise0 = 1.0;
  double noise1 = 1.0;
  Assignment assignment = Assignment::exact_split;

  void validate() const;
  PopulationParams params() const;
  double true_tau() const { return intercept1 - intercept0; }
  TrialDataset sample(std::size_t n, RngStream& rng) const;
};

struct VarianceCheck {
  EstimatorTag tag = EstimatorTag::unadjusted;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t failures = 0;
  /// n * empirical Var(tau_hat) and its Monte Carlo standard error.
  double empirical = 0.0;
  double empirical_se = 0.0;
  double formula = 0.0;
  double ratio = 0.0;
  double ratio_se = 0.0;
};

/// Empirical n Var(tau_hat) against the closed form, one entry per tag
/// (unadjusted, ancova1 and ancova2 only), all computed on the same draws.
std::vector<VarianceCheck> mc_variance_check(const LinearGaussianDgp& dgp, std::span<const EstimatorTag> tags,
                                             std::size_t n, std::size_t reps, std::uint64_t seed,
                                             std::size_t workers = 1);

VarianceCheck mc_variance_check(const LinearGaussianDgp& dgp, EstimatorTag tag, std::size_t n, std::size_t reps,
                                std::uint64_t seed, std::size_t workers = 1);

}  // namespace provar
