#include <doctest.h>

#include <cmath>
#include <vector>

#include "pdmp/quadrature.hpp"

using namespace pdmp;

TEST_SUITE_BEGIN("quadrature");

TEST_CASE("smooth integrands to tight tolerance") {
  CHECK(integrate([](double s) { return s; }, 0.0, 2.0) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(integrate([](double s) { return std::exp(-s); }, 0.0, 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  CHECK(integrate([](double s) { return std::sin(10.0 * s); }, 0.0, 3.0) ==
        doctest::Approx((1.0 - std::cos(30.0)) / 10.0).epsilon(1e-10));
}

TEST_CASE("breakpoints keep piecewise integrands exact") {
  auto f = [](double s) { return s < 1.0 ? 1.0 : 3.0; };
  const double got =
      integrate_with_breakpoints(f, 0.0, 2.0, {1.0});
  CHECK(got == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("non-finite integrand raises a localizable error") {
  auto f = [](double s) { return 1.0 / (s - 0.5); };
  CHECK_THROWS_AS(integrate([f](double s) { return std::log(std::abs(f(s))) / 0.0; },
                            0.0, 1.0),
                  IntegrabilityError);
}

TEST_CASE("semi-infinite integral of an exponential tail") {
  const double got =
      integrate_semi_infinite([](double s) { return std::exp(-2.0 * s); }, 0.0);
  CHECK(got == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("semi-infinite divergence is detected") {
  CHECK_THROWS_AS(
      integrate_semi_infinite([](double s) { return 1.0 / (1.0 + s); }, 0.0),
      IntegrabilityError);
}

TEST_CASE("cumulative integral matches direct integration at interior points") {
  auto density = [](double s) { return std::cos(s) + 2.0; };
  CumulativeIntegral cum(density, 5.0, {1.0, 2.5});
  for (double s : {0.1, 0.99, 1.0, 1.7, 2.5, 3.9, 5.0}) {
    CHECK(cum(s) ==
          doctest::Approx(std::sin(s) + 2.0 * s).epsilon(1e-10));
  }
  CHECK(cum(0.0) == 0.0);
  CHECK_THROWS_AS(cum(5.1), PathDomainError);
}

TEST_SUITE_END();
