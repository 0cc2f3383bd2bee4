#pragma once

#include "provar/dataset.hpp"

#include <string_view>

namespace provar {

/// Least-squares fit of an outcome on a design matrix.
struct OlsFit {
  Vector coefficients;
  Vector residuals;
  /// (Z^T Z)^{-1}, assembled from the QR factors.
  Matrix gram_inverse;
  std::vector<ColumnTag> layout;
  /// Column-equilibrated condition estimate |R_00| / |R_qq| of the pivoted QR.
  double condition_estimate = 1.0;

  double coefficient(ColumnTag tag) const;
};

/// Designs with a condition estimate above this are rejected.
inline constexpr double kMaxCondition = 1e10;

/// OLS via column-pivoted Householder QR on unit-norm columns. Throws
/// SingularDesignError naming the dependent columns when the design is
/// rank deficient or its condition estimate exceeds kMaxCondition.
OlsFit fit_ols(const DesignMatrix& design, const Vector& outcome);

enum class HcFlavor { HC0, HC1 };

HcFlavor parse_hc_flavor(std::string_view name);
std::string_view to_string(HcFlavor flavor);

struct RobustCovariance {
  Matrix matrix;
  HcFlavor flavor = HcFlavor::HC0;
};

/// Heteroscedasticity-robust covariance (Z^T Z)^{-1} (sum e_i^2 z_i z_i^T) (Z^T Z)^{-1},
/// scaled by n / (n - q) for HC1.
RobustCovariance sandwich_covariance(const DesignMatrix& design, const Vector& outcome,
                                     const OlsFit& fit, HcFlavor flavor = HcFlavor::HC0);

}  // namespace provar
