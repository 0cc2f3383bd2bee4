#include "oracles.hpp"

#include "provar/error.hpp"
#include "provar/power.hpp"

#include <doctest.h>

#include <cmath>

using namespace provar;

namespace {

constexpr double kZ975 = 1.959963984540054;
constexpr double kZ80 = 0.8416212335729143;

}  // namespace

TEST_SUITE("power") {

TEST_CASE("bound without a score is the unadjusted variance") {
  const PowerSpec s{0.3, 1.2, 0.8, 0.0, 0.0, 0.3};
  CHECK(variance_bound(s, 250) == doctest::Approx((1.44 / 0.7 + 0.64 / 0.3) / 250).epsilon(1e-14));
}

TEST_CASE("symmetric bound") {
  CHECK(variance_bound(PowerSpec::symmetric(0.2, 1.0, 0.5), 100) == doctest::Approx(0.03).epsilon(1e-14));
  CHECK(variance_bound(PowerSpec::symmetric(0.2, 2.0, 1.0), 100) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("bound for unequal arms by hand") {
  const PowerSpec s{0.5, 1.0, 2.0, 0.4, 0.7, 0.25};
  const double inner = 0.7 * 2.0 / 0.25 + 0.4 * 1.0 / 0.75;
  const double expect = (1.0 / 0.75 + 4.0 / 0.25 - 0.75 * 0.25 * inner * inner) / 80.0;
  CHECK(variance_bound(s, 80) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("null effect has power alpha") {
  CHECK(power_at_n(PowerSpec::symmetric(0.0, 1.0, 0.3), 150) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("power tends to one") {
  CHECK(power_at_n(PowerSpec::symmetric(0.1, 1.0, 0.0), 1000000) > 0.999999);
}

TEST_CASE("textbook two-sample power") {
  const double se = std::sqrt(1.0 / 100 + 1.0 / 100);
  const double expect = oracle::phi(0.4 / se - kZ975) + oracle::phi(-0.4 / se - kZ975);
  CHECK(std::abs(power_at_n(PowerSpec::symmetric(0.4, 1.0, 0.0), 200) - expect) < 1e-3);
  CHECK(expect == doctest::Approx(0.8074).epsilon(1e-3));
}

TEST_CASE("textbook sample size") {
  for (double tau : {0.2, 0.35, 0.5, 1.0}) {
    const double total = 4.0 * (kZ975 + kZ80) * (kZ975 + kZ80) / (tau * tau);
    const auto n = static_cast<double>(required_n(PowerSpec::symmetric(tau, 1.0, 0.0)));
    CHECK(std::abs(n - std::ceil(total)) <= 1.0);
  }
}

TEST_CASE("required n is minimal") {
  for (double rho : {0.0, 0.3, 0.6, 0.9}) {
    const PowerSpec s{0.25, 1.0, 1.3, rho, rho * 0.8, 0.4, 0.05, 0.9};
    const std::uint64_t n = required_n(s);
    CHECK(power_at_n(s, n) >= s.target_power);
    CHECK(power_at_n(s, n - 1) < s.target_power);
  }
}

TEST_CASE("halving the bound halves the sample size") {
  const std::uint64_t full = required_n(PowerSpec::symmetric(0.2, 1.0, 0.0));
  const std::uint64_t half = required_n(PowerSpec::symmetric(0.2, 1.0, std::sqrt(0.5)));
  CHECK(std::abs(2.0 * static_cast<double>(half) - static_cast<double>(full)) <= 2.0);
}

TEST_CASE("arm sizes") {
  const PowerSpec s = PowerSpec::symmetric(0.2, 1.0, 0.0, 1.0 / 3.0);
  const ArmSizes a = arm_sizes(s, 100);
  CHECK(a.n1 == 34);
  CHECK(a.n0 == 66);
}

TEST_CASE("invalid specs") {
  CHECK_THROWS_AS(PowerSpec::symmetric(0.2, 1.0, 1.5).validate(), ValidationError);
  CHECK_THROWS_AS(required_n(PowerSpec::symmetric(0.0, 1.0, 0.0)), ValidationError);
  CHECK_THROWS_AS(power_at_n(PowerSpec::symmetric(0.2, 1.0, 0.0, 0.0), 10), ValidationError);
}

}
