#include "oracles.hpp"

#include "provar/asymptotics.hpp"
#include "provar/power.hpp"

#include <doctest.h>

using namespace provar;

namespace {

// A random valid joint law of (Y0, Y1, X, M): draw a random SPD covariance
// of (X, M, Y0, Y1) and read off the blocks.
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

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("variance ordering and score reduction over random laws") {
  RngStream rng(2024);
  int checked = 0;
  double worst = 0.0;
  for (int draw = 0; draw < 10000; ++draw) {
    const PopulationParams params = random_params(rng);
    params.validate();
    const double un = avar_unadjusted(params);
    const double a1 = avar_ancova1(params);
    const double a2 = avar_ancova2(params);
    const double scale = std::max(1.0, un);
    CHECK(a2 <= a1 + 1e-10 * scale);
    CHECK(a2 <= un + 1e-10 * scale);
    CHECK(a2 >= -1e-10 * scale);

    const double reduction = avar_reduction_from_score(params);
    const double direct = a2 - avar_ancova2(params.with_score_as_covariate());
    worst = std::max(worst, std::abs(reduction - direct));
    CHECK(std::abs(reduction - direct) <= 1e-10 * scale);
    CHECK(reduction >= 0.0);
    ++checked;
  }
  CHECK(checked == 10000);
  MESSAGE("largest |reduction - direct| = " << worst);
}

TEST_CASE("power bound lies between zero and the unadjusted variance") {
  RngStream rng(77);
  for (int draw = 0; draw < 10000; ++draw) {
    PowerSpec s;
    s.tau = rng.uniform(-2, 2);
    s.sigma0 = rng.uniform(0.1, 3);
    s.sigma1 = rng.uniform(0.1, 3);
    s.rho0 = rng.uniform(-1, 1);
    s.rho1 = rng.uniform(-1, 1);
    s.pi1 = rng.uniform(0.05, 0.95);
    const std::uint64_t n = 10 + rng.below(1000);
    const double b = variance_bound(s, n);
    PowerSpec flat = s;
    flat.rho0 = flat.rho1 = 0.0;
    CHECK(b >= -1e-15);
    CHECK(b <= variance_bound(flat, n) * (1 + 1e-12));
    const double pw = power_at_n(s, n);
    CHECK(pw >= s.alpha - 1e-12);
    CHECK(pw <= 1.0);
  }
}

TEST_CASE("plug-in ancova2 never exceeds the unadjusted plug-in") {
  RngStream rng(5);
  for (int draw = 0; draw < 10000; ++draw) {
    const ArmSampleMoments m{rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(-1, 1), rng.uniform(-1, 1),
                             static_cast<std::size_t>(2 + rng.below(500)),
                             static_cast<std::size_t>(2 + rng.below(500))};
    const double flat = m.sigma0 * m.sigma0 / m.n0 + m.sigma1 * m.sigma1 / m.n1;
    CHECK(nu_hat_ancova2(m) <= flat * (1 + 1e-12));
    CHECK(nu_hat_ancova2_xi_star(m) <= flat * (1 + 1e-12));
    CHECK(nu_hat_ancova2_xi_star(m) <= nu_hat_ancova1(m) * (1 + 1e-12) + 1e-15);
  }
}

}
