#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/generator.hpp"
#include "pdmp/process.hpp"
#include "pdmp/value.hpp"

namespace pdmp::models {

struct NamedTestFunction {
  std::string name;
  TestFunction f;
};

/// Closed-form references a model carries for its own verification.  Every
/// oracle must agree with the generic machinery within the tolerances the
/// test suites state.
struct ModelOracles {
  std::function<double(double, double)> survival;            // F(x,t)
  std::function<double(double, double)> value_default;       // V(x; delta)
  std::function<double(double, double)> generator_identity;  // A id(x,t)
};

struct ModelMetadata {
  double grid_lo = 0.0;
  double grid_hi = 1.0;
  double default_horizon = 10.0;
  double period = 0.0;  // minimal period of the flow, 0 if aperiodic
  bool confluent_free = true;  // declared: no confluent state on J_Lambda u J_a
  std::vector<double> equilibrium_states;
};

struct ModelInstance {
  std::string name;
  std::map<std::string, double> params;
  CharacteristicTriple triple;
  SdsFunctional default_reward;  // running part of the default value spec
  ModelOracles oracles;
  ModelMetadata metadata;
  std::vector<NamedTestFunction> test_functions;
  std::function<double(double, double)> sup_rate_bound;

  ValueSpec make_value_spec(double delta) const {
    ValueSpec spec;
    spec.running = default_reward;
    spec.discount = delta;
    spec.sup_rate_bound = sup_rate_bound;
    spec.sup_jump_bound = [](double, double) { return 0.0; };
    return spec;
  }

  const TestFunction& test_function(const std::string& fname) const {
    for (const auto& nf : test_functions) {
      if (nf.name == fname) return nf.f;
    }
    throw ConfigError("unknown test function '" + fname + "' for model " +
                      name);
  }
};

namespace detail {

inline double require(const std::map<std::string, double>& params,
                      const std::string& key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

inline void reject_unknown(const std::map<std::string, double>& params,
                           std::initializer_list<const char*> known) {
  for (const auto& [key, value] : params) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) ok = true;
    }
    if (!ok) {
      throw ConfigError("unknown model parameter '" + key + "'");
    }
  }
}

inline JumpKernel reset_kernel(double target = 0.0) {
  JumpKernel k;
  k.sampler = [target](double, RngStream&) { return target; };
  k.integrator = [target](double, const std::function<double(double)>& f) {
    return f(target);
  };
  k.constant_in_state = true;
  return k;
}

inline JumpKernel uniform_kernel(double lo, double hi) {
  JumpKernel k;
  k.sampler = [lo, hi](double, RngStream& rng) { return rng.uniform(lo, hi); };
  k.integrator = [lo, hi](double, const std::function<double(double)>& f) {
    return integrate(f, lo, hi) / (hi - lo);
  };
  k.constant_in_state = true;
  return k;
}

/// Downward exponential claims: Y = x - Z, Z ~ Exp(theta).
inline JumpKernel exponential_claim_kernel(double theta) {
  JumpKernel k;
  k.sampler = [theta](double x, RngStream& rng) {
    return x - rng.exponential(theta);
  };
  k.integrator = [theta](double x, const std::function<double(double)>& f) {
    return integrate_semi_infinite(
        [&](double z) { return f(x - z) * theta * std::exp(-theta * z); },
        0.0);
  };
  return k;
}

inline SdsFunctional constant_rate_hazard(double lambda) {
  SdsFunctional h;
  h.rate = [lambda](double) { return lambda; };
  h.jump = [](double) { return 0.0; };
  h.jump_schedule = [](double, double) { return std::vector<double>{}; };
  h.cumulative_rate = [lambda](double, double t) { return lambda * t; };
  return h;
}

inline TestFunction linear_test_function(double drift) {
  TestFunction f;
  f.value = [](double x) { return x; };
  f.path_rate = [drift](double) { return drift; };
  f.path_jump = [](double) { return 0.0; };
  f.jump_schedule = [](double, double) { return std::vector<double>{}; };
  return f;
}

inline TestFunction sine_test_function(double drift) {
  TestFunction f;
  f.value = [](double x) { return std::sin(x); };
  f.path_rate = [drift](double x) { return drift * std::cos(x); };
  f.path_jump = [](double) { return 0.0; };
  f.jump_schedule = [](double, double) { return std::vector<double>{}; };
  return f;
}

inline bool near_integer(double z) {
  return std::abs(z - std::round(z)) <= 1e-9;
}

/// Path times in (0, t_max] at which the age flow x + t crosses an integer.
inline std::vector<double> integer_crossings(double x, double t_max) {
  std::vector<double> times;
  double k = std::floor(x) + 1.0;
  for (; k - x <= t_max * (1.0 + 1e-15); k += 1.0) {
    const double s = k - x;
    if (s > 0.0) times.push_back(s);
    if (times.size() > SdsFunctional::kMaxScheduledAtoms) break;
  }
  return times;
}

}  // namespace detail

/// Deterministic drift, no jumps: phi(t,x) = x + ct, Lambda = 0.
inline ModelInstance build_drift_only(std::map<std::string, double> params) {
  detail::reject_unknown(params, {"c"});
  const double c = detail::require(params, "c", 1.0);
  ModelInstance m;
  m.name = "drift_only";
  m.params = {{"c", c}};
  m.triple.flow.map = [c](double t, double x) { return x + c * t; };
  m.triple.flow.killing_time = [](double) { return kInfinity; };
  m.triple.hazard = SdsFunctional::zero();
  m.triple.kernel.sampler = [](double x, RngStream&) { return x; };
  m.triple.kernel.integrator = [](double x,
                                  const std::function<double(double)>& f) {
    return f(x);
  };
  m.triple.probe_states = {0.0, 0.5, 1.0, 2.5};

  m.default_reward.rate = [](double x) { return x; };
  m.default_reward.jump = [](double) { return 0.0; };
  m.default_reward.jump_schedule = [](double, double) {
    return std::vector<double>{};
  };
  m.default_reward.cumulative_rate = [c](double x, double t) {
    return x * t + 0.5 * c * t * t;
  };
  m.sup_rate_bound = [c](double x0, double T) {
    return std::max(std::abs(x0), std::abs(x0 + c * T));
  };

  m.oracles.survival = [](double, double) { return 1.0; };
  m.oracles.value_default = [c](double x, double delta) {
    return x / delta + c / (delta * delta);
  };
  m.oracles.generator_identity = [c](double, double t) { return c * t; };

  m.metadata.grid_lo = 0.0;
  m.metadata.grid_hi = 10.0;
  m.metadata.default_horizon = 10.0;
  m.test_functions.push_back({"linear", detail::linear_test_function(c)});
  m.test_functions.push_back({"sine", detail::sine_test_function(c)});
  return m;
}

/// Drift with constant-rate jumps resetting the state to zero.
inline ModelInstance build_drift_poisson_reset(
    std::map<std::string, double> params) {
  detail::reject_unknown(params, {"c", "lambda"});
  const double c = detail::require(params, "c", 1.0);
  const double lambda = detail::require(params, "lambda", 1.0);
  if (lambda < 0.0) throw ConfigError("drift_poisson_reset: lambda >= 0");
  ModelInstance m;
  m.name = "drift_poisson_reset";
  m.params = {{"c", c}, {"lambda", lambda}};
  m.triple.flow.map = [c](double t, double x) { return x + c * t; };
  m.triple.flow.killing_time = [](double) { return kInfinity; };
  m.triple.hazard = detail::constant_rate_hazard(lambda);
  m.triple.kernel = detail::reset_kernel(0.0);
  m.triple.probe_states = {0.0, 0.5, 1.0, 2.0};

  m.default_reward = SdsFunctional::zero();
  m.default_reward.rate = [](double x) { return x; };
  m.default_reward.cumulative_rate = [c](double x, double t) {
    return x * t + 0.5 * c * t * t;
  };
  m.sup_rate_bound = [c](double x0, double T) {
    return std::abs(x0) + std::abs(c) * T;
  };

  m.oracles.survival = [lambda](double, double t) {
    return std::exp(-lambda * t);
  };
  // Plug V = alpha x + beta into the rate equation with the reset kernel:
  // c alpha + lambda (V(0) - V(x)) + x = delta V(x).
  m.oracles.value_default = [c, lambda](double x, double delta) {
    const double alpha = 1.0 / (delta + lambda);
    const double beta = c * alpha / delta;
    return alpha * x + beta;
  };
  m.oracles.generator_identity = [c, lambda](double x, double t) {
    return c * t - lambda * (x * t + 0.5 * c * t * t);
  };

  m.metadata.grid_lo = 0.0;
  m.metadata.grid_hi = 10.0;
  m.metadata.default_horizon = 10.0;
  m.test_functions.push_back({"linear", detail::linear_test_function(c)});
  m.test_functions.push_back({"sine", detail::sine_test_function(c)});
  return m;
}

/// Risk-reserve dynamics: premium drift c, claims at rate lambda with
/// exponential(theta) sizes subtracted from the state.
inline ModelInstance build_cramer_lundberg(
    std::map<std::string, double> params) {
  detail::reject_unknown(params, {"c", "lambda", "theta"});
  const double c = detail::require(params, "c", 1.5);
  const double lambda = detail::require(params, "lambda", 1.0);
  const double theta = detail::require(params, "theta", 2.0);
  if (lambda < 0.0) throw ConfigError("cramer_lundberg: lambda >= 0");
  if (!(theta > 0.0)) throw ConfigError("cramer_lundberg: theta > 0");
  ModelInstance m;
  m.name = "cramer_lundberg";
  m.params = {{"c", c}, {"lambda", lambda}, {"theta", theta}};
  m.triple.flow.map = [c](double t, double x) { return x + c * t; };
  m.triple.flow.killing_time = [](double) { return kInfinity; };
  m.triple.hazard = detail::constant_rate_hazard(lambda);
  m.triple.kernel = detail::exponential_claim_kernel(theta);
  m.triple.probe_states = {0.0, 1.0, 2.0, 5.0};

  m.default_reward = SdsFunctional::zero();
  m.default_reward.rate = [](double x) { return x; };
  m.default_reward.cumulative_rate = [c](double x, double t) {
    return x * t + 0.5 * c * t * t;
  };
  m.sup_rate_bound = [c](double x0, double T) {
    // Claims only lower the state; the drift segment dominates |l| = |x|
    // unless deep negative excursions occur, which carry the same scale.
    return std::abs(x0) + std::abs(c) * T + 40.0;
  };

  m.oracles.survival = [lambda](double, double t) {
    return std::exp(-lambda * t);
  };
  // Mean claim size is 1/theta, so V(x) = x/delta + (c - lambda/theta)/delta^2.
  m.oracles.value_default = [c, lambda, theta](double x, double delta) {
    return x / delta + (c - lambda / theta) / (delta * delta);
  };
  m.oracles.generator_identity = [c, lambda, theta](double, double t) {
    return (c - lambda / theta) * t;
  };

  m.metadata.grid_lo = -20.0;
  m.metadata.grid_hi = 12.0;
  m.metadata.default_horizon = 10.0;
  m.test_functions.push_back({"linear", detail::linear_test_function(c)});
  TestFunction bounded;
  bounded.value = [](double x) { return std::tanh(x); };
  bounded.path_rate = [c](double x) {
    const double th = std::tanh(x);
    return c * (1.0 - th * th);
  };
  bounded.path_jump = [](double) { return 0.0; };
  bounded.jump_schedule = [](double, double) { return std::vector<double>{}; };
  m.test_functions.push_back({"tanh", bounded});
  return m;
}

/// Quasi-step model: age flow with jump opportunities of probability p at
/// integer ages and reset on jump; tau_1 from age 0 is geometric(p).
inline ModelInstance build_quasi_step_maintenance(
    std::map<std::string, double> params) {
  detail::reject_unknown(params, {"p"});
  const double p = detail::require(params, "p", 0.3);
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("quasi_step_maintenance: p must lie in (0,1)");
  }
  ModelInstance m;
  m.name = "quasi_step_maintenance";
  m.params = {{"p", p}};
  m.triple.flow.map = [](double t, double x) { return x + t; };
  m.triple.flow.killing_time = [](double) { return kInfinity; };
  m.triple.hazard.rate = [](double) { return 0.0; };
  m.triple.hazard.cumulative_rate = [](double, double) { return 0.0; };
  m.triple.hazard.jump = [p](double z) {
    return detail::near_integer(z) ? p : 0.0;
  };
  m.triple.hazard.jump_schedule = [](double x, double t_max) {
    return detail::integer_crossings(x, t_max);
  };
  m.triple.kernel = detail::reset_kernel(0.0);
  m.triple.probe_states = {0.0, 0.3, 1.5};

  m.default_reward = SdsFunctional::zero();
  m.default_reward.rate = [](double x) { return x; };
  m.default_reward.cumulative_rate = [](double x, double t) {
    return x * t + 0.5 * t * t;
  };
  m.sup_rate_bound = [](double x0, double T) { return std::abs(x0) + T; };

  m.oracles.survival = [p](double x, double t) {
    const double crossings = std::floor(x + t + 1e-12) - std::floor(x + 1e-12);
    return std::pow(1.0 - p, crossings);
  };
  // Renewal series: V(x) = A(x) + B(x) V(0) with V(0) = A(0)/(1 - B(0)),
  // summed until the geometric tail is negligible.
  m.oracles.value_default = [p](double x, double delta) {
    auto series = [p, delta](double x0, double& A, double& B) {
      A = 0.0;
      B = 0.0;
      double keep = 1.0;
      const double first = std::floor(x0) + 1.0 - x0;
      for (int i = 0; i < 100000; ++i) {
        const double s = first + i;
        const double disc = std::exp(-delta * s);
        const double running =
            x0 * (1.0 - disc) / delta +
            (1.0 - disc * (1.0 + delta * s)) / (delta * delta);
        A += keep * p * running;
        B += keep * p * disc;
        keep *= 1.0 - p;
        if (keep * (1.0 + running) < 1e-16) break;
      }
      // Mass that never jumps is zero in the limit; the running reward of
      // the residual tail is bounded by keep * (x0 + s + 1/delta)/delta.
    };
    double A0, B0, Ax, Bx;
    series(0.0, A0, B0);
    const double v0 = A0 / (1.0 - B0);
    if (x == 0.0) return v0;
    series(x, Ax, Bx);
    return Ax + Bx * v0;
  };
  m.oracles.generator_identity = [p](double x, double t) {
    double total = t;
    for (double s : detail::integer_crossings(x, t)) {
      total -= p * (x + s);
    }
    return total;
  };

  m.metadata.grid_lo = 0.0;
  m.metadata.grid_hi = 8.0;
  m.metadata.default_horizon = 12.0;
  m.test_functions.push_back({"linear", detail::linear_test_function(1.0)});
  TestFunction step;
  step.value = [](double x) { return 0.2 * std::floor(x + 1e-9); };
  step.path_rate = [](double) { return 0.0; };
  step.path_jump = [](double z) {
    return detail::near_integer(z) ? 0.2 : 0.0;
  };
  step.jump_schedule = [](double x, double t_max) {
    return detail::integer_crossings(x, t_max);
  };
  m.test_functions.push_back({"step", step});
  return m;
}

/// Davis-style model on E = [0,1): unit drift, finite killing time
/// c(x) = 1 - x, forced jump at the active boundary {1}, uniform re-entry
/// kernel on [0, 1/2], optional interior hazard rate.
inline ModelInstance build_davis_boundary(
    std::map<std::string, double> params) {
  detail::reject_unknown(params, {"lambda"});
  const double lambda = detail::require(params, "lambda", 0.0);
  if (lambda < 0.0) throw ConfigError("davis_boundary: lambda >= 0");
  ModelInstance m;
  m.name = "davis_boundary";
  m.params = {{"lambda", lambda}};
  m.triple.flow.map = [](double t, double x) { return x + t; };
  m.triple.flow.killing_time = [](double x) { return 1.0 - x; };
  m.triple.flow.boundary_point = [](double) { return 1.0; };
  m.triple.hazard.rate = [lambda](double) { return lambda; };
  m.triple.hazard.cumulative_rate = [lambda](double, double t) {
    return lambda * t;
  };
  m.triple.hazard.jump = [](double z) { return z >= 1.0 - 1e-9 ? 1.0 : 0.0; };
  m.triple.hazard.jump_schedule = [](double x, double t_max) {
    std::vector<double> times;
    const double c = 1.0 - x;
    if (c > 0.0 && c <= t_max * (1.0 + kAtomTimeTol)) times.push_back(c);
    return times;
  };
  m.triple.kernel = detail::uniform_kernel(0.0, 0.5);
  m.triple.probe_states = {0.0, 0.25, 0.5};
  m.triple.probe_horizon = 5.0;

  m.default_reward = SdsFunctional::zero();
  m.default_reward.rate = [](double x) { return x; };
  m.default_reward.cumulative_rate = [](double x, double t) {
    return x * t + 0.5 * t * t;
  };
  m.sup_rate_bound = [](double, double) { return 1.0; };

  m.oracles.survival = [lambda](double x, double t) {
    if (t >= (1.0 - x) * (1.0 - kAtomTimeTol)) return 0.0;
    return std::exp(-lambda * t);
  };

  m.metadata.grid_lo = 0.0;
  m.metadata.grid_hi = 1.0;
  m.metadata.default_horizon = 5.0;
  m.test_functions.push_back({"linear", detail::linear_test_function(1.0)});
  return m;
}

/// Rotation on the circle [0, 2*pi): a periodic flow (minimal period
/// 2*pi/omega) with constant hazard and uniform re-draw on the circle.
inline ModelInstance build_circle_rotation(
    std::map<std::string, double> params) {
  detail::reject_unknown(params, {"omega", "lambda"});
  const double omega = detail::require(params, "omega", 1.0);
  const double lambda = detail::require(params, "lambda", 0.5);
  if (!(omega > 0.0)) throw ConfigError("circle_rotation: omega > 0");
  if (lambda < 0.0) throw ConfigError("circle_rotation: lambda >= 0");
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  auto wrap = [](double v) {
    double r = std::fmod(v, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return r;
  };
  ModelInstance m;
  m.name = "circle_rotation";
  m.params = {{"omega", omega}, {"lambda", lambda}};
  m.triple.flow.map = [wrap, omega](double t, double x) {
    return wrap(x + omega * t);
  };
  m.triple.flow.killing_time = [](double) { return kInfinity; };
  m.triple.hazard = detail::constant_rate_hazard(lambda);
  m.triple.kernel = detail::uniform_kernel(0.0, kTwoPi);
  m.triple.probe_states = {0.0, 1.0, std::numbers::pi};

  m.default_reward = SdsFunctional::zero();
  m.default_reward.rate = [](double x) { return std::cos(x); };
  m.default_reward.cumulative_rate = [omega](double x, double t) {
    return (std::sin(x + omega * t) - std::sin(x)) / omega;
  };
  m.sup_rate_bound = [](double, double) { return 1.0; };

  m.oracles.survival = [lambda](double, double t) {
    return std::exp(-lambda * t);
  };
  // V = A cos + B sin solves the rate equation with the centered uniform
  // kernel; the circle mean of V is zero.
  m.oracles.value_default = [omega, lambda](double x, double delta) {
    const double d = delta + lambda;
    const double denom = d * d + omega * omega;
    return (d * std::cos(x) - omega * std::sin(x)) / denom;
  };

  m.metadata.grid_lo = 0.0;
  m.metadata.grid_hi = kTwoPi;
  m.metadata.default_horizon = 10.0;
  m.metadata.period = kTwoPi / omega;
  TestFunction sine;
  sine.value = [](double x) { return std::sin(x); };
  sine.path_rate = [omega](double x) { return omega * std::cos(x); };
  sine.path_jump = [](double) { return 0.0; };
  sine.jump_schedule = [](double, double) { return std::vector<double>{}; };
  m.test_functions.push_back({"sine", sine});
  TestFunction cosine;
  cosine.value = [](double x) { return std::cos(x); };
  cosine.path_rate = [omega](double x) { return -omega * std::sin(x); };
  cosine.path_jump = [](double) { return 0.0; };
  cosine.jump_schedule = [](double, double) { return std::vector<double>{}; };
  m.test_functions.push_back({"cosine", cosine});
  return m;
}

inline const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {
      "drift_only",       "drift_poisson_reset",    "cramer_lundberg",
      "quasi_step_maintenance", "davis_boundary",   "circle_rotation"};
  return names;
}

inline ModelInstance build(const std::string& name,
                           const std::map<std::string, double>& params = {}) {
  if (name == "drift_only") return build_drift_only(params);
  if (name == "drift_poisson_reset") return build_drift_poisson_reset(params);
  if (name == "cramer_lundberg") return build_cramer_lundberg(params);
  if (name == "quasi_step_maintenance") {
    return build_quasi_step_maintenance(params);
  }
  if (name == "davis_boundary") return build_davis_boundary(params);
  if (name == "circle_rotation") return build_circle_rotation(params);
  std::ostringstream oss;
  oss << "unknown model '" << name << "'; available:";
  for (const auto& n : model_names()) oss << ' ' << n;
  throw ConfigError(oss.str());
}

}  // namespace pdmp::models
