#include "provar/normal.hpp"

#include "provar/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>

namespace provar {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double two_sided_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace provar
