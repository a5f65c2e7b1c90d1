#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "pdmp/rng.hpp"
#include "pdmp/sds.hpp"

using namespace pdmp;

namespace {

Flow drift_flow(double c) {
  Flow f;
  f.map = [c](double t, double x) { return x + c * t; };
  f.killing_time = [](double) { return kInfinity; };
  return f;
}

Flow rotation_flow(double omega) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  Flow f;
  f.map = [omega, kTwoPi](double t, double x) {
    double r = std::fmod(x + omega * t, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return r;
  };
  f.killing_time = [](double) { return kInfinity; };
  return f;
}

SdsFunctional linear_rate_functional() {
  SdsFunctional a = SdsFunctional::zero();
  a.rate = [](double x) { return x; };
  a.cumulative_rate = nullptr;
  return a;
}

SdsFunctional integer_jump_functional(double size) {
  SdsFunctional a = SdsFunctional::zero();
  a.cumulative_rate = [](double, double) { return 0.0; };
  a.jump = [size](double z) {
    return std::abs(z - std::round(z)) <= 1e-9 ? size : 0.0;
  };
  a.jump_schedule = [](double x, double t_max) {
    std::vector<double> times;
    for (double k = std::floor(x) + 1.0; k - x <= t_max; k += 1.0) {
      times.push_back(k - x);
    }
    return times;
  };
  return a;
}

}  // namespace

TEST_SUITE_BEGIN("sds");

TEST_CASE("equilibrium state: a(x,t) = g(x) t") {
  Flow still;
  still.map = [](double, double x) { return x; };
  still.killing_time = [](double) { return kInfinity; };
  SdsFunctional a = SdsFunctional::zero();
  const double gamma = 0.85;
  a.rate = [gamma](double) { return gamma; };
  a.cumulative_rate = nullptr;
  for (double t : {0.0, 0.5, 2.0, 7.5}) {
    CHECK(evaluate(a, still, 1.3, t) ==
          doctest::Approx(gamma * t).epsilon(1e-12));
  }
}

TEST_CASE("pure jumps on an integer schedule") {
  Flow flow = drift_flow(1.0);
  SdsFunctional a = integer_jump_functional(0.5);
  CHECK(evaluate(a, flow, 0.0, 2.5) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(evaluate(a, flow, 0.0, 0.5) == 0.0);
  CHECK(evaluate(a, flow, 0.25, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("rate x on a drift flow: analytic integral") {
  const double c = 0.8;
  Flow flow = drift_flow(c);
  SdsFunctional a = linear_rate_functional();
  for (double x : {0.0, 1.0, 2.5}) {
    for (double t : {0.4, 1.0, 3.0}) {
      CHECK(evaluate(a, flow, x, t) ==
            doctest::Approx(x * t + 0.5 * c * t * t).epsilon(1e-9));
    }
  }
}

TEST_CASE("evaluation beyond the killing time is rejected by name") {
  Flow flow = drift_flow(1.0);
  flow.killing_time = [](double x) { return 2.0 - x; };
  SdsFunctional a = linear_rate_functional();
  CHECK_NOTHROW(evaluate(a, flow, 0.5, 1.5));
  CHECK_THROWS_WITH_AS(evaluate(a, flow, 0.5, 1.6),
                       doctest::Contains("killing time"), PathDomainError);
}

TEST_CASE("additivity residual vanishes") {
  Flow flow = drift_flow(1.0);
  SdsFunctional a = linear_rate_functional();
  SUBCASE("s = 0 exactly") {
    CHECK(check_additivity(a, flow, 1.0, 0.0, 1.3) == 0.0);
  }
  SUBCASE("drift split point") {
    CHECK(std::abs(check_additivity(a, flow, 1.0, 0.5, 0.7)) <= 1e-9);
  }
  SUBCASE("mixed functional with atoms") {
    SdsFunctional b = integer_jump_functional(0.25);
    b.rate = [](double x) { return std::sin(x); };
    b.cumulative_rate = nullptr;
    CHECK(std::abs(check_additivity(b, flow, 0.3, 1.2, 2.1)) <= 1e-9);
  }
}

TEST_CASE("additivity on a rotation across a full period") {
  const double omega = 2.0;
  Flow flow = rotation_flow(omega);
  SdsFunctional a = SdsFunctional::zero();
  a.rate = [](double x) { return std::cos(x); };
  a.cumulative_rate = [omega](double x, double t) {
    return (std::sin(x + omega * t) - std::sin(x)) / omega;
  };
  const double period = 2.0 * std::numbers::pi / omega;
  CHECK(std::abs(check_additivity(a, flow, 1.0, 0.6 * period, 0.7 * period)) <=
        1e-9);
}

TEST_CASE("periodic reduction agrees with direct evaluation") {
  const double omega = 1.0;
  Flow flow = rotation_flow(omega);
  const double period = 2.0 * std::numbers::pi / omega;
  SdsFunctional a = SdsFunctional::zero();
  a.rate = [](double x) { return std::cos(x); };
  a.cumulative_rate = nullptr;

  SUBCASE("t equal to the period") {
    CHECK(periodic_reduction(a, flow, 0.7, period, period) ==
          doctest::Approx(evaluate(a, flow, 0.7, period)).epsilon(1e-10));
  }
  SUBCASE("t = 2.5 periods") {
    const double t = 2.5 * period;
    CHECK(std::abs(periodic_reduction(a, flow, 0.7, period, t) -
                   evaluate(a, flow, 0.7, t)) <= 1e-8);
  }
  SUBCASE("t = 0") {
    CHECK(periodic_reduction(a, flow, 0.7, period, 0.0) == 0.0);
  }
  SUBCASE("period must be positive") {
    CHECK_THROWS_AS(periodic_reduction(a, flow, 0.7, 0.0, 1.0), ModelError);
  }
}

TEST_CASE("flow laws hold on randomized samples") {
  RngStream rng(2024, 0);
  Flow flow = drift_flow(1.0);
  flow.killing_time = [](double x) { return 4.0 - x; };
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0.0, 1.0);
    const double c = flow.killing_time(x);
    const double s = rng.uniform(0.0, 0.45 * c);
    const double t = rng.uniform(0.0, 0.45 * c);
    CHECK(std::abs(flow.map(t, flow.map(s, x)) - flow.map(s + t, x)) <= 1e-9);
    CHECK(std::abs(flow.killing_time(flow.map(t, x)) - (c - t)) <= 1e-9);
    CHECK(flow.map(0.0, x) == x);
  }
}

TEST_CASE("Lebesgue decomposition of a path restriction re-sums") {
  Flow flow = drift_flow(1.0);
  SdsFunctional a = integer_jump_functional(0.25);
  a.rate = [](double x) { return 0.5 + std::cos(x); };
  a.cumulative_rate = nullptr;
  FVFunction path = restrict_to_path(a, flow, 0.3, 3.0);
  auto [ac, pd] = decompose(path);
  for (int i = 0; i <= 300; ++i) {
    const double t = 3.0 * i / 300.0;
    CHECK(std::abs(ac(t) + pd(t) - path(t)) <= 1e-10);
  }
}

TEST_CASE("right derivative of a(x,.) transports the rate along the flow") {
  Flow flow = drift_flow(1.0);
  SdsFunctional a = linear_rate_functional();
  const double x = 0.7;
  for (double s : {0.3, 1.1, 2.4}) {
    const double h = 1e-6;
    const double fd =
        (evaluate(a, flow, x, s + h) - evaluate(a, flow, x, s)) / h;
    CHECK(std::abs(fd - a.rate(flow.map(s, x))) <= 1e-4);
  }
}

TEST_CASE("schedules violating monotonicity are rejected") {
  Flow flow = drift_flow(1.0);
  SdsFunctional a = SdsFunctional::zero();
  a.jump = [](double) { return 0.1; };
  a.jump_schedule = [](double, double) {
    return std::vector<double>{1.0, 0.5};
  };
  CHECK_THROWS_AS(evaluate(a, flow, 0.0, 2.0), ModelError);
}

TEST_SUITE_END();
