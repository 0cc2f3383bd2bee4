#include "provar/asymptotics.hpp"

#include "provar/error.hpp"
#include "provar/ols.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace provar {
namespace {

// Cholesky factor of an SPD matrix, refusing ill-conditioned input.
Eigen::LLT<Matrix> spd_factor(const Matrix& s, const char* what) {
  if (s.rows() != s.cols() || s.rows() == 0) throw ValidationError(std::string(what) + " must be square and non-empty");
  if (!s.isApprox(s.transpose(), 1e-12)) throw ValidationError(std::string(what) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw ValidationError(std::string(what) + " is singular or too ill-conditioned to invert");
  }
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw ValidationError(std::string(what) + " is not positive definite");
  return llt;
}

double sample_cov(const Vector& a, const Vector& b) {
  const double n = static_cast<double>(a.size());
  return ((a.array() - a.mean()) * (b.array() - b.mean())).sum() / (n - 1.0);
}

Vector select(const Vector& v, const Vector& w, double arm) {
  Vector out(static_cast<Eigen::Index>((w.array() == arm).count()));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (w[i] == arm) out[k++] = v[i];
  }
  return out;
}

}  // namespace

void PopulationParams::validate() const {
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw ValidationError("pi1 must lie in (0, 1)");
  if (!(sigma0 >= 0.0) || !(sigma1 >= 0.0)) throw ValidationError("outcome standard deviations must be >= 0");
  const auto p = sigma_x.rows();
  if (sigma_x.cols() != p || xi0.size() != p || xi1.size() != p) {
    throw ValidationError("population params: inconsistent covariate dimensions");
  }
  spd_factor(sigma_x, "Sigma_x");
  if (score) {
    if (score->zeta.size() != p) throw ValidationError("population params: zeta has the wrong length");
    if (!(score->sigma_m >= 0.0)) throw ValidationError("sigma_m must be >= 0");
    Matrix bordered(p + 1, p + 1);
    bordered.topLeftCorner(p, p) = sigma_x;
    bordered.topRightCorner(p, 1) = score->zeta;
    bordered.bottomLeftCorner(1, p) = score->zeta.transpose();
    bordered(p, p) = score->sigma_m * score->sigma_m;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(bordered, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw ValidationError("joint covariance of (X, M) is not positive semidefinite");
    }
  }
}

PopulationParams PopulationParams::with_score_as_covariate() const {
  if (!score) throw ValidationError("with_score_as_covariate: no score moments");
  const auto p = sigma_x.rows();
  PopulationParams out;
  out.pi1 = pi1;
  out.sigma0 = sigma0;
  out.sigma1 = sigma1;
  out.sigma_x.resize(p + 1, p + 1);
  out.sigma_x.topLeftCorner(p, p) = sigma_x;
  out.sigma_x.topRightCorner(p, 1) = score->zeta;
  out.sigma_x.bottomLeftCorner(1, p) = score->zeta.transpose();
  out.sigma_x(p, p) = score->sigma_m * score->sigma_m;
  out.xi0.resize(p + 1);
  out.xi0 << xi0, score->xi0m;
  out.xi1.resize(p + 1);
  out.xi1 << xi1, score->xi1m;
  return out;
}

PopulationParams PopulationParams::from_sample(const TrialDataset& trial, std::span<const double> scores) {
  if (trial.has_missing()) throw ValidationError("from_sample: impute the trial first");
  if (!scores.empty() && scores.size() != trial.size()) throw ValidationError("from_sample: score length mismatch");
  const Vector& w = trial.treatment();
  const Vector& y = trial.outcome();
  const Matrix& x = trial.covariates();
  const auto p = x.cols();

  PopulationParams out;
  out.pi1 = trial.treated_fraction();
  const Vector y0 = select(y, w, 0.0);
  const Vector y1 = select(y, w, 1.0);
  out.sigma0 = std::sqrt(sample_cov(y0, y0));
  out.sigma1 = std::sqrt(sample_cov(y1, y1));

  const Matrix centered = x.rowwise() - x.colwise().mean();
  out.sigma_x = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  out.xi0.resize(p);
  out.xi1.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Vector xj = x.col(j);
    out.xi0[j] = sample_cov(y0, select(xj, w, 0.0));
    out.xi1[j] = sample_cov(y1, select(xj, w, 1.0));
  }
  if (!scores.empty()) {
    const Vector m = Eigen::Map<const Vector>(scores.data(), static_cast<Eigen::Index>(scores.size()));
    ScoreMoments s;
    s.zeta.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) s.zeta[j] = sample_cov(x.col(j), m);
    s.sigma_m = std::sqrt(sample_cov(m, m));
    s.xi0m = sample_cov(y0, select(m, w, 0.0));
    s.xi1m = sample_cov(y1, select(m, w, 1.0));
    out.score = std::move(s);
  }
  return out;
}

double avar_unadjusted(const PopulationParams& params) {
  return params.sigma0 * params.sigma0 / params.pi0() + params.sigma1 * params.sigma1 / params.pi1;
}

double avar_ancova1(const PopulationParams& params) {
  const auto llt = spd_factor(params.sigma_x, "Sigma_x");
  const Vector xi = params.xi();
  const Vector xi_star = params.xi_star();
  const Vector v_xi = llt.solve(xi);
  const double k = 1.0 / (params.pi0() * params.pi1);
  return avar_unadjusted(params) + k * xi.dot(v_xi) - 2.0 * k * xi_star.dot(v_xi);
}

double avar_ancova2(const PopulationParams& params) {
  const auto llt = spd_factor(params.sigma_x, "Sigma_x");
  const Vector xi_star = params.xi_star();
  const double k = 1.0 / (params.pi0() * params.pi1);
  return avar_unadjusted(params) - k * xi_star.dot(llt.solve(xi_star));
}

double avar_reduction_from_score(const PopulationParams& params) {
  if (!params.score) throw ValidationError("avar_reduction_from_score: no score moments supplied");
  const auto& s = *params.score;
  const auto llt = spd_factor(params.sigma_x, "Sigma_x");
  const Vector v_zeta = llt.solve(s.zeta);
  const double var_m = s.sigma_m * s.sigma_m;
  const double schur = var_m - s.zeta.dot(v_zeta);
  if (!(schur > 1e-12 * std::max(var_m, 1e-300))) {
    throw ValidationError(
        "score variance is fully explained by the covariates (sigma_m^2 - zeta' Sigma_x^-1 zeta <= 0); "
        "the score is collinear with X");
  }
  const double pi0 = params.pi0();
  const double pi1 = params.pi1;
  const double xi_m_star = pi0 * s.xi1m + pi1 * s.xi0m;
  const Vector xi_x_star = pi0 * params.xi1 + pi1 * params.xi0;
  const double num = xi_m_star - xi_x_star.dot(v_zeta);
  return (num * num / schur) / (pi0 * pi1);
}

double nu_hat_ancova1(const ArmSampleMoments& m) {
  const double n0 = static_cast<double>(m.n0);
  const double n1 = static_cast<double>(m.n1);
  const double n = n0 + n1;
  const double a = m.rho0 * m.sigma0 / n1 + m.rho1 * m.sigma1 / n0;
  const double b = m.rho0 * m.sigma0 / n0 + m.rho1 * m.sigma1 / n1;
  const double scale = n0 * n1 / n;
  return m.sigma0 * m.sigma0 / n0 + m.sigma1 * m.sigma1 / n1 + scale * a * a - 2.0 * scale * a * b;
}

double nu_hat_ancova2(const ArmSampleMoments& m) {
  const double n0 = static_cast<double>(m.n0);
  const double n1 = static_cast<double>(m.n1);
  const double n = n0 + n1;
  const double a = m.rho0 * m.sigma0 / n1 + m.rho1 * m.sigma1 / n0;
  return m.sigma0 * m.sigma0 / n0 + m.sigma1 * m.sigma1 / n1 - (n0 * n1 / n) * a * a;
}

double nu_hat_ancova2_xi_star(const ArmSampleMoments& m) {
  const double n0 = static_cast<double>(m.n0);
  const double n1 = static_cast<double>(m.n1);
  const double n = n0 + n1;
  const double b = m.rho0 * m.sigma0 / n0 + m.rho1 * m.sigma1 / n1;
  return m.sigma0 * m.sigma0 / n0 + m.sigma1 * m.sigma1 / n1 - (n0 * n1 / n) * b * b;
}

}  // namespace provar
