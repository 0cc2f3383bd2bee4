#include "oracles.hpp"

#include "provar/asymptotics.hpp"
#include "provar/error.hpp"
#include "provar/simulation.hpp"

#include <doctest.h>

using namespace provar;

namespace {

PopulationParams scalar_params(double pi1, double s0, double s1, double xi0, double xi1, double vx = 1.0) {
  PopulationParams p;
  p.pi1 = pi1;
  p.sigma0 = s0;
  p.sigma1 = s1;
  p.sigma_x = Matrix::Constant(1, 1, vx);
  p.xi0 = Vector::Constant(1, xi0);
  p.xi1 = Vector::Constant(1, xi1);
  return p;
}

}  // namespace

TEST_SUITE("asymptotics") {

TEST_CASE("unadjusted") {
  CHECK(avar_unadjusted(scalar_params(0.5, 1, 1, 0, 0)) == doctest::Approx(4.0));
  CHECK(avar_unadjusted(scalar_params(5.0 / 6.0, 1, 2, 0, 0)) == doctest::Approx(10.8).epsilon(1e-12));
}

TEST_CASE("ancova1 equals ancova2 when xi0 == xi1 or pi1 == 1/2") {
  const PopulationParams a = scalar_params(0.3, 1.0, 1.4, 0.6, 0.6, 2.0);
  CHECK(avar_ancova1(a) == doctest::Approx(avar_ancova2(a)).epsilon(1e-12));
  const PopulationParams b = scalar_params(0.5, 1.0, 1.4, 0.2, 0.9, 2.0);
  CHECK(avar_ancova1(b) == doctest::Approx(avar_ancova2(b)).epsilon(1e-12));
}

TEST_CASE("ancova1 counterexample") {
  const PopulationParams p = scalar_params(5.0 / 6.0, 1, 1, 1, 4);
  CHECK(p.xi()[0] == doctest::Approx(3.5));
  CHECK(p.xi_star()[0] == doctest::Approx(1.5));
  CHECK(avar_ancova1(p) - avar_unadjusted(p) == doctest::Approx(12.6).epsilon(1e-12));
  CHECK(avar_ancova1(p) > avar_ancova2(p));
}

TEST_CASE("ancova2 examples") {
  CHECK(avar_ancova2(scalar_params(0.3, 1, 2, 0, 0)) == doctest::Approx(avar_unadjusted(scalar_params(0.3, 1, 2, 0, 0))));
  for (double rho : {0.0, 0.3, 0.7, 0.95}) {
    CHECK(avar_ancova2(scalar_params(0.5, 1, 1, rho, rho)) == doctest::Approx(4.0 - 4.0 * rho * rho).epsilon(1e-12));
  }
}

TEST_CASE("ancova2 against a three-covariate hand computation") {
  PopulationParams p;
  p.pi1 = 0.25;
  p.sigma0 = 2.0;
  p.sigma1 = 3.0;
  p.sigma_x = Matrix::Identity(3, 3) * 2.0;
  p.xi0 = Vector::Constant(3, 0.5);
  p.xi1 = Vector::Constant(3, 1.0);
  // xi* = 0.25*0.5 + 0.75*1 = 0.875 per coordinate; quadratic form 3 * 0.875^2 / 2.
  const double expect = 4.0 / 0.75 + 9.0 / 0.25 - (3.0 * 0.875 * 0.875 / 2.0) / (0.25 * 0.75);
  CHECK(avar_ancova2(p) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("score reduction examples") {
  PopulationParams p = scalar_params(0.5, 1, 1, 0.3, 0.3);
  p.score = ScoreMoments{Vector::Zero(1), 2.0, 0.0, 0.0};
  CHECK(avar_reduction_from_score(p) == doctest::Approx(0.0));
  for (double rho : {0.2, 0.5, 0.9}) {
    PopulationParams q = scalar_params(0.5, 1, 1, 0, 0);
    q.score = ScoreMoments{Vector::Zero(1), 1.5, rho * 1.5, rho * 1.5};
    CHECK(avar_reduction_from_score(q) == doctest::Approx(4.0 * rho * rho).epsilon(1e-12));
  }
}

TEST_CASE("score reduction matches the appended-covariate formula") {
  PopulationParams p;
  p.pi1 = 0.4;
  p.sigma0 = 2.0;
  p.sigma1 = 2.5;
  p.sigma_x.resize(2, 2);
  p.sigma_x << 1.0, 0.3, 0.3, 2.0;
  p.xi0.resize(2);
  p.xi0 << 0.4, 0.8;
  p.xi1.resize(2);
  p.xi1 << 0.2, 1.1;
  Vector zeta(2);
  zeta << 0.2, 0.5;
  p.score = ScoreMoments{zeta, 1.3, 0.9, 1.2};
  p.validate();
  const double direct = avar_ancova2(p) - avar_ancova2(p.with_score_as_covariate());
  CHECK(avar_reduction_from_score(p) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(scalar_params(1.0, 1, 1, 0, 0).validate(), ValidationError);
  CHECK_THROWS_AS(avar_ancova2(scalar_params(0.5, 1, 1, 0, 0, 0.0)), ValidationError);
  PopulationParams p = scalar_params(0.5, 1, 1, 0, 0);
  p.score = ScoreMoments{Vector::Constant(1, 2.0), 1.0, 0.0, 0.0};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  PopulationParams q = scalar_params(0.5, 1, 1, 0.5, 0.5);
  q.score = ScoreMoments{Vector::Constant(1, 1.0), 1.0, 0.5, 0.5};
  CHECK_THROWS_AS(avar_reduction_from_score(q), ValidationError);
}

TEST_CASE("plug-in ancova1 variance") {
  const ArmSampleMoments none{1.3, 0.7, 0.0, 0.0, 40, 60};
  CHECK(nu_hat_ancova1(none) == doctest::Approx(1.69 / 40 + 0.49 / 60).epsilon(1e-14));
  for (double rho : {0.1, 0.5, 0.8}) {
    const ArmSampleMoments m{1.5, 1.5, rho, rho, 100, 100};
    const PopulationParams p = scalar_params(0.5, 1.5, 1.5, rho * 1.5, rho * 1.5);
    CHECK(nu_hat_ancova1(m) == doctest::Approx(avar_ancova1(p) / 200.0).epsilon(1e-12));
  }
  // unequal arms against the n-scaled population formula with standardised X
  const ArmSampleMoments m{1.2, 2.0, 0.3, 0.6, 150, 50};
  const PopulationParams p = scalar_params(0.25, 1.2, 2.0, 0.3 * 1.2, 0.6 * 2.0);
  CHECK(nu_hat_ancova1(m) == doctest::Approx(avar_ancova1(p) / 200.0).epsilon(1e-12));
}

TEST_CASE("plug-in ancova2 variance") {
  const ArmSampleMoments none{1.3, 0.7, 0.0, 0.0, 40, 60};
  CHECK(nu_hat_ancova2(none) == doctest::Approx(1.69 / 40 + 0.49 / 60).epsilon(1e-14));
  CHECK(nu_hat_ancova2_xi_star(none) == doctest::Approx(1.69 / 40 + 0.49 / 60).epsilon(1e-14));
  for (double rho : {0.2, 0.6}) {
    const ArmSampleMoments m{1.0, 1.0, rho, rho, 250, 250};
    CHECK(nu_hat_ancova2(m) == doctest::Approx((4.0 - 4.0 * rho * rho) / 500.0).epsilon(1e-12));
    CHECK(nu_hat_ancova2_xi_star(m) == doctest::Approx(nu_hat_ancova2(m)).epsilon(1e-14));
  }
  const ArmSampleMoments m{1.2, 2.0, 0.3, 0.6, 150, 50};
  CHECK(nu_hat_ancova2(m) <= 1.44 / 150 + 4.0 / 50);
  CHECK(nu_hat_ancova2_xi_star(m) <= 1.44 / 150 + 4.0 / 50);
  const PopulationParams p = scalar_params(0.25, 1.2, 2.0, 0.3 * 1.2, 0.6 * 2.0);
  CHECK(nu_hat_ancova2_xi_star(m) == doctest::Approx(avar_ancova2(p) / 200.0).epsilon(1e-12));
}

TEST_CASE("plug-in ancova1 variance is consistent") {
  LinearGaussianDgp dgp;
  dgp.pi1 = 0.3;
  dgp.sigma_x = Matrix::Constant(1, 1, 1.0);
  dgp.beta0 = Vector::Constant(1, 0.8);
  dgp.beta1 = Vector::Constant(1, 2.0);
  dgp.noise0 = 1.0;
  dgp.noise1 = 0.5;
  const double target = avar_ancova1(dgp.params());
  double err[2];
  int k = 0;
  for (std::size_t n : {500u, 5000u}) {
    double total = 0.0;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
      RngStream rng(31, {n, rep});
      const TrialDataset t = dgp.sample(n, rng);
      const PopulationParams s = PopulationParams::from_sample(t);
      const double sx = std::sqrt(s.sigma_x(0, 0));
      const ArmSampleMoments m{s.sigma0, s.sigma1, s.xi0[0] / (s.sigma0 * sx), s.xi1[0] / (s.sigma1 * sx),
                               t.n_control(), t.n_treated()};
      total += static_cast<double>(n) * nu_hat_ancova1(m);
    }
    err[k++] = std::abs(total / 20.0 / target - 1.0);
  }
  CHECK(err[1] < 0.03);
  CHECK(err[0] < 0.1);
}

TEST_CASE("sample moments recover the population") {
  LinearGaussianDgp dgp;
  dgp.pi1 = 0.5;
  dgp.sigma_x = Matrix::Identity(2, 2);
  dgp.beta0 = Vector::Constant(2, 1.0);
  dgp.beta1 = Vector::Constant(2, 0.5);
  RngStream rng(77);
  const TrialDataset t = dgp.sample(200000, rng);
  const PopulationParams s = PopulationParams::from_sample(t);
  const PopulationParams p = dgp.params();
  CHECK(s.sigma0 == doctest::Approx(p.sigma0).epsilon(0.02));
  CHECK(s.xi1[1] == doctest::Approx(p.xi1[1]).epsilon(0.03));
  CHECK(avar_ancova2(s) == doctest::Approx(avar_ancova2(p)).epsilon(0.03));
}

}
