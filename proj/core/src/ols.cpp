#include "provar/ols.hpp"

#include "provar/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace provar {

double OlsFit::coefficient(ColumnTag tag) const {
  const auto it = std::find(layout.begin(), layout.end(), tag);
  if (it == layout.end()) throw Error("fit has no coefficient for the requested column");
  return coefficients[it - layout.begin()];
}

OlsFit fit_ols(const DesignMatrix& design, const Vector& outcome) {
  const Matrix& z = design.columns;
  const Eigen::Index n = z.rows();
  const Eigen::Index q = z.cols();
  if (outcome.size() != n) throw ValidationError("fit_ols: outcome length does not match design rows");
  if (n <= q) {
    std::ostringstream msg;
    msg << "fit_ols: need more observations (" << n << ") than columns (" << q << ")";
    throw ValidationError(msg.str());
  }

  const auto column_name = [&](Eigen::Index j) {
    return static_cast<std::size_t>(j) < design.names.size() ? design.names[static_cast<std::size_t>(j)]
                                                              : "column " + std::to_string(j);
  };

  const Vector norms = z.colwise().norm().transpose();
  std::vector<std::string> zero_cols;
  for (Eigen::Index j = 0; j < q; ++j) {
    if (!(norms[j] > 0.0)) zero_cols.push_back(column_name(j));
  }
  if (!zero_cols.empty()) {
    throw SingularDesignError("singular design: all-zero column(s) " + zero_cols.front(), zero_cols);
  }

  const Vector inv_norms = norms.cwiseInverse();
  const Matrix scaled = z * inv_norms.asDiagonal();
  Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
  const Matrix r = qr.matrixR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  const auto& perm = qr.colsPermutation().indices();

  const double r0 = std::abs(r(0, 0));
  double rmin = r0;
  std::vector<std::string> offending;
  for (Eigen::Index k = 0; k < q; ++k) {
    const double rk = std::abs(r(k, k));
    rmin = std::min(rmin, rk);
    if (!(rk * kMaxCondition >= r0)) offending.push_back(column_name(perm[k]));
  }
  if (!offending.empty()) {
    std::ostringstream msg;
    msg << "singular design: column(s) ";
    for (std::size_t i = 0; i < offending.size(); ++i) msg << (i ? ", " : "") << offending[i];
    msg << " are (nearly) linear combinations of the others";
    throw SingularDesignError(msg.str(), offending);
  }

  OlsFit fit;
  fit.layout = design.layout;
  fit.condition_estimate = r0 / rmin;
  fit.coefficients = qr.solve(outcome).cwiseProduct(inv_norms);
  fit.residuals = outcome - z * fit.coefficients;

  // (Zs^T Zs)^{-1} = P R^{-1} R^{-T} P^T, then undo the column scaling.
  const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(q, q));
  const Matrix core = r_inv * r_inv.transpose();
  Matrix g(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      g(perm[i], perm[j]) = core(i, j);
    }
  }
  fit.gram_inverse = inv_norms.asDiagonal() * g * inv_norms.asDiagonal();
  fit.gram_inverse = 0.5 * (fit.gram_inverse + fit.gram_inverse.transpose()).eval();
  return fit;
}

HcFlavor parse_hc_flavor(std::string_view name) {
  if (name == "HC0" || name == "hc0") return HcFlavor::HC0;
  if (name == "HC1" || name == "hc1") return HcFlavor::HC1;
  throw ValidationError("unknown sandwich flavor '" + std::string(name) + "' (expected HC0 or HC1)");
}

std::string_view to_string(HcFlavor flavor) {
  switch (flavor) {
    case HcFlavor::HC0:
      return "HC0";
    case HcFlavor::HC1:
      return "HC1";
  }
  throw ValidationError("unknown sandwich flavor");
}

RobustCovariance sandwich_covariance(const DesignMatrix& design, const Vector& outcome, const OlsFit& fit,
                                     HcFlavor flavor) {
  const Matrix& z = design.columns;
  const Eigen::Index n = z.rows();
  const Eigen::Index q = z.cols();
  if (fit.coefficients.size() != q || fit.residuals.size() != n || outcome.size() != n) {
    throw ValidationError("sandwich_covariance: fit does not belong to this design/outcome");
  }

  const Matrix weighted = z.array().colwise() * fit.residuals.array();
  const Matrix meat = weighted.transpose() * weighted;
  Matrix cov = fit.gram_inverse * meat * fit.gram_inverse;
  cov = 0.5 * (cov + cov.transpose()).eval();

  switch (flavor) {
    case HcFlavor::HC0:
      break;
    case HcFlavor::HC1:
      cov *= static_cast<double>(n) / static_cast<double>(n - q);
      break;
    default:
      throw ValidationError("sandwich_covariance: unknown flavor");
  }
  return {std::move(cov), flavor};
}

}  // namespace provar
