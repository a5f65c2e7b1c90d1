#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/stieltjes.hpp"

namespace pdmp {

/// Deterministic semi-dynamic system: a closed-form flow map with a killing
/// time.  Laws expected of a valid flow (checked by property tests, not at
/// construction):
///   phi(0,x) = x,
///   phi(t, phi(s,x)) = phi(s+t, x)   for s+t < c(x),
///   c(phi(t,x)) = c(x) - t           for t < c(x).
struct Flow {
  std::function<double(double, double)> map;        // (t, x) -> state
  std::function<double(double)> killing_time;       // c(x), may be +inf
  std::function<double(double)> boundary_point;     // optional phi(c(x), x)

  double at(double t, double x) const { return map(t, x); }

  double killing(double x) const {
    return killing_time ? killing_time(x) : kInfinity;
  }

  /// State at path time t, using the declared boundary point when the flow
  /// is evaluated exactly at a finite killing time.
  double state_at(double t, double x) const {
    const double c = killing(x);
    if (boundary_point && std::isfinite(c) &&
        std::abs(t - c) <= kAtomTimeTol * std::max(1.0, c)) {
      return boundary_point(x);
    }
    return map(t, x);
  }
};

/// Additive functional of an SDS, a |-> a(x,t), represented by its path rate
/// Xa, its jump sizes Da at states, and the schedule of path times where
/// jumps occur.  The evaluated form is
///   a(x,t) = int_0^t rate(phi(s,x)) ds + sum_{s in schedule, s<=t}
///            jump(phi(s,x)),
/// the singular-continuous part being structurally zero.
struct SdsFunctional {
  std::function<double(double)> rate;   // Xa
  std::function<double(double)> jump;   // Da; zero off the jump set
  // (x, t_max) -> strictly increasing times in (0, t_max].
  std::function<std::vector<double>(double, double)> jump_schedule;
  // Optional closed form (x,t) -> int_0^t rate(phi(s,x)) ds; accelerates
  // evaluation and sampling, falls back to quadrature when absent.
  std::function<double(double, double)> cumulative_rate;

  static constexpr std::size_t kMaxScheduledAtoms = 100000;

  std::vector<double> schedule(double x, double t_max) const {
    if (!jump_schedule) return {};
    std::vector<double> times = jump_schedule(x, t_max);
    if (times.size() > kMaxScheduledAtoms) {
      std::ostringstream oss;
      oss << "jump schedule produced " << times.size()
          << " atoms on a compact interval (cap " << kMaxScheduledAtoms
          << "); functional is not of locally finite variation";
      throw ModelError(oss.str());
    }
    double prev = 0.0;
    for (double s : times) {
      if (!(s > prev) || s > t_max * (1.0 + kAtomTimeTol)) {
        throw ModelError(
            "jump schedule must be strictly increasing within (0, t_max]");
      }
      prev = s;
    }
    return times;
  }

  static SdsFunctional zero() {
    SdsFunctional a;
    a.rate = [](double) { return 0.0; };
    a.jump = [](double) { return 0.0; };
    a.jump_schedule = [](double, double) { return std::vector<double>{}; };
    a.cumulative_rate = [](double, double) { return 0.0; };
    return a;
  }
};

namespace detail {

inline void check_path_time(const Flow& flow, double x, double t) {
  const double c = flow.killing(x);
  if (t > c * (1.0 + kAtomTimeTol)) {
    std::ostringstream oss;
    oss << "path time " << t << " beyond killing time c(x) = " << c;
    throw PathDomainError(oss.str());
  }
}

}  // namespace detail

/// One-path restriction a(x, .) as an FVFunction on [0, t_max].
/// Requires t_max within the definition interval of the path.
inline FVFunction restrict_to_path(const SdsFunctional& a, const Flow& flow,
                                   double x, double t_max) {
  detail::check_path_time(flow, x, t_max);
  std::vector<Atom> atoms;
  for (double s : a.schedule(x, t_max)) {
    const double size = a.jump ? a.jump(flow.state_at(s, x)) : 0.0;
    if (size != 0.0) atoms.push_back({s, size});
  }
  FVFunction::Density density = nullptr;
  if (a.rate) {
    density = [rate = a.rate, map = flow.map, x](double s) {
      return rate(map(s, x));
    };
  }
  FVFunction::Density exact = nullptr;
  if (a.cumulative_rate) {
    // Capture the atom list by value; prefix sums are cheap at this scale.
    exact = [cum = a.cumulative_rate, x, atoms](double t) {
      double total = cum(x, t);
      for (const Atom& at : atoms) {
        if (at.time > t + kAtomTimeTol) break;
        total += at.size;
      }
      return total;
    };
  }
  return FVFunction(0.0, t_max, std::move(density), std::move(atoms),
                    std::move(exact));
}

/// a(x,t) by the Lebesgue representation (ac part by quadrature unless a
/// closed-form cumulative is supplied, atoms exact).
inline double evaluate(const SdsFunctional& a, const Flow& flow, double x,
                       double t, const QuadratureOptions& opts = {}) {
  detail::check_path_time(flow, x, t);
  if (t == 0.0) return 0.0;
  double total = 0.0;
  if (a.cumulative_rate) {
    total += a.cumulative_rate(x, t);
  } else if (a.rate) {
    const std::vector<double> cuts = a.schedule(x, t);
    total += integrate_with_breakpoints(
        [&](double s) { return a.rate(flow.map(s, x)); }, 0.0, t, cuts, opts);
  }
  if (a.jump) {
    for (double s : a.schedule(x, t)) {
      total += a.jump(flow.state_at(s, x));
    }
  }
  return total;
}

/// Residual of the additivity law a(x,s) + a(phi(s,x),t) - a(x,s+t).
inline double check_additivity(const SdsFunctional& a, const Flow& flow,
                               double x, double s, double t,
                               const QuadratureOptions& opts = {}) {
  const double whole = evaluate(a, flow, x, s + t, opts);
  const double first = evaluate(a, flow, x, s, opts);
  const double rest = evaluate(a, flow, flow.map(s, x), t, opts);
  return first + rest - whole;
}

/// Evaluation through the periodic reduction
///   a(x,t) = floor(t/T) a(x,T) + a(x, t - floor(t/T) T)
/// for a state declared periodic with minimal period T > 0.
inline double periodic_reduction(const SdsFunctional& a, const Flow& flow,
                                 double x, double period, double t,
                                 const QuadratureOptions& opts = {}) {
  if (!(period > 0.0)) {
    throw ModelError("periodic_reduction: period must be positive");
  }
  const double cycles = std::floor(t / period);
  const double remainder = t - cycles * period;
  return cycles * evaluate(a, flow, x, period, opts) +
         evaluate(a, flow, x, remainder, opts);
}

}  // namespace pdmp
