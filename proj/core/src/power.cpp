#include "provar/power.hpp"

#include "provar/error.hpp"
#include "provar/normal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace provar {

void PowerSpec::validate() const {
  if (!std::isfinite(tau)) throw ValidationError("tau must be finite");
  if (!(sigma0 >= 0.0) || !(sigma1 >= 0.0)) throw ValidationError("sigma0 and sigma1 must be >= 0");
  if (!(std::abs(rho0) <= 1.0) || !(std::abs(rho1) <= 1.0)) throw ValidationError("|rho_w| must be <= 1");
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw ValidationError("pi1 must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (!(target_power > 0.0 && target_power < 1.0)) throw ValidationError("target power must lie in (0, 1)");
}

PowerSpec PowerSpec::symmetric(double tau, double sigma, double rho, double pi1, double alpha,
                               double target_power) {
  return PowerSpec{tau, sigma, sigma, rho, rho, pi1, alpha, target_power};
}

double variance_bound(const PowerSpec& spec, std::uint64_t n) {
  spec.validate();
  if (n == 0) throw ValidationError("n must be positive");
  const double pi0 = spec.pi0();
  const double pi1 = spec.pi1;
  const double unadjusted = spec.sigma0 * spec.sigma0 / pi0 + spec.sigma1 * spec.sigma1 / pi1;
  const double gain_root = spec.rho1 * spec.sigma1 / pi1 + spec.rho0 * spec.sigma0 / pi0;
  double bound = unadjusted - pi0 * pi1 * gain_root * gain_root;
  if (bound < 0.0) {
    if (bound < -1e-12 * std::max(unadjusted, 1.0)) {
      throw ValidationError("variance bound is negative (" + std::to_string(bound) +
                            "); check that the correlations and variances are jointly possible");
    }
    bound = 0.0;
  }
  return bound / static_cast<double>(n);
}

double power_at_n(const PowerSpec& spec, std::uint64_t n) {
  const double var = variance_bound(spec, n);
  const double z = normal_quantile(1.0 - spec.alpha / 2.0);
  const double effect = std::abs(spec.tau);
  if (var == 0.0) return effect == 0.0 ? spec.alpha : 1.0;
  const double shift = effect / std::sqrt(var);
  return normal_cdf(shift - z) + normal_cdf(-shift - z);
}

std::uint64_t required_n(const PowerSpec& spec) {
  spec.validate();
  if (spec.tau == 0.0) throw ValidationError("required_n: tau must be non-zero");
  if (!(spec.target_power > spec.alpha)) throw ValidationError("required_n: target power must exceed alpha");
  if (power_at_n(spec, kMaxSampleSize) < spec.target_power) {
    throw ValidationError("required_n: target power unreachable with n <= 1e9");
  }
  std::uint64_t lo = 1;
  std::uint64_t hi = kMaxSampleSize;
  if (power_at_n(spec, lo) >= spec.target_power) return lo;
  // Invariant: power(lo) < target <= power(hi).
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (power_at_n(spec, mid) >= spec.target_power) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

ArmSizes arm_sizes(const PowerSpec& spec, std::uint64_t n) {
  const auto n1 = static_cast<std::uint64_t>(std::ceil(static_cast<double>(n) * spec.pi1 - 1e-9));
  return {n - std::min(n1, n), std::min(n1, n)};
}

}  // namespace provar
