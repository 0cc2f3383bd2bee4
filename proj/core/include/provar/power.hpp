#pragma once

#include <cstdint>

namespace provar {

/// Inputs to a prospective power calculation for the prognostic estimator.
struct PowerSpec {
  double tau = 0.0;
  double sigma0 = 1.0;
  double sigma1 = 1.0;
  /// Correlation between the prognostic score and Y_w.
  double rho0 = 0.0;
  double rho1 = 0.0;
  double pi1 = 0.5;
  double alpha = 0.05;
  double target_power = 0.8;

  double pi0() const { return 1.0 - pi1; }
  void validate() const;

  /// Equal-variance, equal-correlation preset.
  static PowerSpec symmetric(double tau, double sigma, double rho, double pi1 = 0.5, double alpha = 0.05,
                             double target_power = 0.8);
};

/// Upper bound on Var(tau_hat) of the prognostic estimator at total size n:
/// (1/n) [s0^2/pi0 + s1^2/pi1 - pi0 pi1 (rho1 s1/pi1 + rho0 s0/pi0)^2].
double variance_bound(const PowerSpec& spec, std::uint64_t n);

/// Two-sided normal-approximation power with variance_bound as the variance.
double power_at_n(const PowerSpec& spec, std::uint64_t n);

inline constexpr std::uint64_t kMaxSampleSize = 1'000'000'000;

/// Smallest total n with power_at_n >= target_power (bisection).
std::uint64_t required_n(const PowerSpec& spec);

struct ArmSizes {
  std::uint64_t n0 = 0;
  std::uint64_t n1 = 0;
};

/// n1 = ceil(n pi1), n0 = n - n1.
ArmSizes arm_sizes(const PowerSpec& spec, std::uint64_t n);

}  // namespace provar
