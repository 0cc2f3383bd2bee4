#pragma once

#include "provar/dataset.hpp"

#include <optional>
#include <span>

namespace provar {

/// Second moments of a scalar prognostic score M.
struct ScoreMoments {
  /// Cov(X, M), length p.
  Vector zeta;
  double sigma_m = 0.0;
  /// Cov(Y_0, M) and Cov(Y_1, M).
  double xi0m = 0.0;
  double xi1m = 0.0;
};

/// Population quantities that determine every closed-form asymptotic variance.
struct PopulationParams {
  double pi1 = 0.5;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  /// Var(X), p x p.
  Matrix sigma_x;
  /// Cov(Y_0, X) and Cov(Y_1, X).
  Vector xi0;
  Vector xi1;
  std::optional<ScoreMoments> score;

  double pi0() const { return 1.0 - pi1; }
  std::size_t dims() const { return static_cast<std::size_t>(sigma_x.rows()); }
  /// pi0 xi0 + pi1 xi1.
  Vector xi() const { return pi0() * xi0 + pi1 * xi1; }
  /// pi1 xi0 + pi0 xi1.
  Vector xi_star() const { return pi1 * xi0 + pi0() * xi1; }

  /// Throws ValidationError when the parameters cannot be a covariance structure.
  void validate() const;

  /// The (p+1)-covariate parameters with the score appended to X.
  PopulationParams with_score_as_covariate() const;

  /// Plug-in moments from a complete trial; arm-specific quantities use the
  /// subjects of that arm. `scores` empty means no score moments.
  static PopulationParams from_sample(const TrialDataset& trial, std::span<const double> scores = {});
};

// All avar_* functions return n * Var(tau_hat), the asymptotic scale.

double avar_unadjusted(const PopulationParams& params);
double avar_ancova1(const PopulationParams& params);
double avar_ancova2(const PopulationParams& params);

/// Drop in avar_ancova2 from appending the score to the covariates.
/// Requires params.score and a positive Schur complement
/// sigma_m^2 - zeta^T Sigma_x^{-1} zeta.
double avar_reduction_from_score(const PopulationParams& params);

/// Per-arm plug-in moments for a single covariate.
struct ArmSampleMoments {
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  /// Correlation of the outcome with the covariate within each arm.
  double rho0 = 0.0;
  double rho1 = 0.0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
};

/// Plug-in estimate of Var(tau_hat) (not n-scaled) for ANCOVA I, one covariate.
double nu_hat_ancova1(const ArmSampleMoments& m);

/// Plug-in estimate of Var(tau_hat) for ANCOVA II, one covariate. The
/// subtracted cross term weights rho0 sigma0 by 1/n1.
double nu_hat_ancova2(const ArmSampleMoments& m);

/// Variant whose cross term weights rho0 sigma0 by 1/n0, which is the
/// plug-in of the xi* combination in avar_ancova2. Coincides with
/// nu_hat_ancova2 when n0 == n1 or rho0 sigma0 == rho1 sigma1.
double nu_hat_ancova2_xi_star(const ArmSampleMoments& m);

}  // namespace provar
