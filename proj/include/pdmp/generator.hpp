#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/process.hpp"

namespace pdmp {

/// A test function f together with its declared path derivative Xf and path
/// jumps Df (supplied, not numerically differentiated; a finite-difference
/// certifier validates them).  path_jump(z) is f(z) minus the limit of f
/// along the flow into z; the schedule lists the path times where it is
/// nonzero.
struct TestFunction {
  std::function<double(double)> value;
  std::function<double(double)> path_rate;  // Xf
  std::function<double(double)> path_jump;  // Df at states
  std::function<std::vector<double>(double, double)> jump_schedule;

  double operator()(double x) const { return value(x); }

  double rate_at(double z) const { return path_rate ? path_rate(z) : 0.0; }
  double jump_at(double z) const { return path_jump ? path_jump(z) : 0.0; }

  /// The functional Df with rate Xf and jump Df; f is of locally
  /// path-finite variation iff this reproduces f(phi(t,x)) - f(x).
  SdsFunctional path_differential() const {
    SdsFunctional d;
    d.rate = path_rate ? path_rate : [](double) { return 0.0; };
    d.jump = path_jump ? path_jump : [](double) { return 0.0; };
    d.jump_schedule =
        jump_schedule ? jump_schedule
                      : [](double, double) { return std::vector<double>{}; };
    return d;
  }

  static TestFunction constant(double c) {
    TestFunction f;
    f.value = [c](double) { return c; };
    f.path_rate = [](double) { return 0.0; };
    f.path_jump = [](double) { return 0.0; };
    f.jump_schedule = [](double, double) { return std::vector<double>{}; };
    return f;
  }
};

namespace detail {

inline std::vector<double> merged_schedule(const CharacteristicTriple& triple,
                                           const TestFunction& f, double x,
                                           double t) {
  std::vector<double> times = triple.hazard.schedule(x, t);
  if (f.jump_schedule) {
    for (double s : f.jump_schedule(x, t)) times.push_back(s);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(),
                          [](double a, double b) {
                            return std::abs(a - b) <= kAtomTimeTol;
                          }),
              times.end());
  return times;
}

/// int_E [f(y) - f(z)] Q(z, dy).
inline double kernel_increment(const CharacteristicTriple& triple,
                               const TestFunction& f, double z) {
  const double fz = f.value(z);
  return triple.kernel.integrate(
      z, [&](double y) { return f.value(y) - fz; });
}

}  // namespace detail

/// The measure-valued generator image Af as an additive functional of the
/// SDS:
///   rate  XAf(z) = Xf(z) + lambda(z) int [f(y)-f(z)] Q(z,dy)
///   jump  DAf(z) = Df(z) + dLambda(z) int [f(y)-f(z)] Q(z,dy)
/// with atoms only at hazard atoms or f-jump times.
inline SdsFunctional generator_measure(const CharacteristicTriple& triple,
                                       const TestFunction& f) {
  SdsFunctional out;
  out.rate = [triple, f](double z) {
    return f.rate_at(z) +
           triple.hazard.rate(z) * detail::kernel_increment(triple, f, z);
  };
  out.jump = [triple, f](double z) {
    const double dl = triple.hazard.jump(z);
    const double df = f.jump_at(z);
    if (dl == 0.0 && df == 0.0) return 0.0;
    return df + dl * detail::kernel_increment(triple, f, z);
  };
  out.jump_schedule = [triple, f](double x, double t) {
    return detail::merged_schedule(triple, f, x, t);
  };
  return out;
}

/// Af(x,t) = Df(x,t) + int_{(0,t]} int_E [f(y) - f(phi(s,x))] q(x,s,dy)
/// Lambda(x,ds), with q recovered through the flow as Q(phi(s,x), .).
inline double apply_generator(const CharacteristicTriple& triple,
                              const TestFunction& f, double x, double t,
                              const QuadratureOptions& opts = {}) {
  detail::check_path_time(triple.flow, x, t);
  const double direct = f.value(triple.flow.state_at(t, x)) - f.value(x);
  FVFunction lam = restrict_to_path(triple.hazard, triple.flow, x, t);
  const std::vector<double> f_jumps =
      f.jump_schedule ? f.jump_schedule(x, t) : std::vector<double>{};
  const double hazard_part = ls_integral(
      [&](double s) {
        return detail::kernel_increment(triple, f,
                                        triple.flow.state_at(s, x));
      },
      lam, t, f_jumps, opts);
  return direct + hazard_part;
}

struct DomainReport {
  double vloc_residual = 0.0;   // |Df evaluation - direct difference|
  double abs_integral = 0.0;    // int int |f(y)-f(phi(s,x))| q Lambda(ds)
  bool vloc_ok = false;
  bool integrable = false;
  bool pass = false;
  double threshold = 0.0;
  std::string diagnostic;
};

/// Checks membership of f in the generator domain along the path from x:
/// (i) certification that f has locally path-finite variation (the supplied
/// Df reproduces f(phi(t,x)) - f(x)); (ii) finiteness of the absolute
/// hazard integral, with divergence diagnosed against a numeric threshold.
inline DomainReport domain_check(const CharacteristicTriple& triple,
                                 const TestFunction& f, double x, double t,
                                 const QuadratureOptions& opts = {}) {
  DomainReport report;
  report.threshold = 1e12;

  const SdsFunctional df = f.path_differential();
  constexpr int kProbes = 7;
  double worst = 0.0;
  for (int i = 1; i <= kProbes; ++i) {
    const double s = t * i / kProbes;
    const double via_functional = evaluate(df, triple.flow, x, s, opts);
    const double direct = f.value(triple.flow.state_at(s, x)) - f.value(x);
    worst = std::max(worst, std::abs(via_functional - direct));
  }
  report.vloc_residual = worst;
  report.vloc_ok = worst <= 1e-8;

  try {
    FVFunction lam = restrict_to_path(triple.hazard, triple.flow, x, t);
    const std::vector<double> f_jumps =
        f.jump_schedule ? f.jump_schedule(x, t) : std::vector<double>{};
    report.abs_integral = ls_integral(
        [&](double s) {
          const double z = triple.flow.state_at(s, x);
          const double fz = f.value(z);
          return triple.kernel.integrate(
              z, [&](double y) { return std::abs(f.value(y) - fz); });
        },
        lam, t, f_jumps, opts);
    report.integrable = std::isfinite(report.abs_integral) &&
                        report.abs_integral < report.threshold;
    if (!report.integrable) {
      std::ostringstream oss;
      oss << "absolute hazard integral " << report.abs_integral
          << " exceeds threshold " << report.threshold;
      report.diagnostic = oss.str();
    }
  } catch (const IntegrabilityError& e) {
    report.integrable = false;
    report.abs_integral = kInfinity;
    report.diagnostic = e.what();
  }
  report.pass = report.vloc_ok && report.integrable;
  return report;
}

struct ConstraintAtom {
  double time;
  double state;
  double residual;
};

struct ConstraintReport {
  std::vector<ConstraintAtom> atoms;
  double max_abs_residual = 0.0;
  double tolerance = 1e-8;
  bool pass = true;
};

/// Purely discontinuous constraint of the extended generator: at every
/// scheduled atom in (0,t] the atom of Af must vanish,
///   Df(z) + dLambda(z) int [f(y)-f(z)] Q(z,dy) = 0.
/// For a PDMP in the sense of Davis this is exactly the boundary condition
/// on the active boundary (dLambda = 1); the sc constraint holds vacuously.
inline ConstraintReport constraint_check(const CharacteristicTriple& triple,
                                         const TestFunction& f, double x,
                                         double t) {
  ConstraintReport report;
  const double horizon = std::min(t, triple.flow.killing(x));
  for (double s : detail::merged_schedule(triple, f, x, horizon)) {
    const double z = triple.flow.state_at(s, x);
    const double residual =
        f.jump_at(z) +
        triple.hazard.jump(z) * detail::kernel_increment(triple, f, z);
    report.atoms.push_back({s, z, residual});
    report.max_abs_residual =
        std::max(report.max_abs_residual, std::abs(residual));
  }
  report.pass = report.max_abs_residual <= report.tolerance;
  return report;
}

/// Pointwise extended generator
///   A'f(x) = Xf(x) + lambda(x) int [f(y)-f(x)] Q(x,dy),
/// valid only when the atom constraints vanish along the path from x.
inline double extended_generator(const CharacteristicTriple& triple,
                                 const TestFunction& f, double x,
                                 bool check_constraints = true) {
  if (check_constraints) {
    const double horizon =
        std::min(triple.probe_horizon, triple.flow.killing(x));
    const ConstraintReport report =
        constraint_check(triple, f, x, horizon);
    if (!report.pass) {
      std::ostringstream oss;
      oss << "f is not in the extended-generator domain: atom constraint "
             "residual "
          << report.max_abs_residual << " at path time "
          << report.atoms.front().time;
      throw NotInDomainError(oss.str());
    }
  }
  return f.rate_at(x) +
         triple.hazard.rate(x) * detail::kernel_increment(triple, f, x);
}

/// L-extended generator A''f(x) = Kf(x) + int [f(y)-f(x)] Q(x,dy), where Kf
/// is the density of Df against the hazard: Xf(x) = Kf(x) lambda(x) on the
/// rate part and Df(x) = Kf(x) dLambda(x) at atoms.
inline double l_extended_generator(const CharacteristicTriple& triple,
                                   const TestFunction& f, double x,
                                   double tol = 1e-8) {
  const double lambda = triple.hazard.rate(x);
  const double dl = triple.hazard.jump(x);
  const double xf = f.rate_at(x);
  const double df = f.jump_at(x);
  bool have_k = false;
  double k = 0.0;
  if (lambda > 0.0) {
    k = xf / lambda;
    have_k = true;
  } else if (std::abs(xf) > tol) {
    throw NotInDomainError(
        "Kf does not exist: Xf(x) != 0 where the hazard rate vanishes");
  }
  if (dl > 0.0) {
    const double k_atom = df / dl;
    if (have_k && std::abs(k_atom - k) > tol) {
      std::ostringstream oss;
      oss << "Kf does not exist: rate part gives " << k
          << " but the atom part gives " << k_atom;
      throw NotInDomainError(oss.str());
    }
    k = k_atom;
    have_k = true;
  } else if (std::abs(df) > tol) {
    throw NotInDomainError(
        "Kf does not exist: Df(x) != 0 off the hazard atoms");
  }
  return k + detail::kernel_increment(triple, f, x);
}

enum class GeneratorKind {
  MeasureValued,  // M^f_t with the measure-valued generator (Ito formula)
  Extended,       // M'_t with the pointwise extended generator
};

/// Ito-formula residual along a given trajectory:
///   M^f_t = f(X_t) - f(X_0) - sum_n Af(X_{tau_n}, t & tau_{n+1} - tau_n).
/// With kind Extended the sum is replaced by int_0^t A'f(X_s) ds.
inline double ito_residual(const CharacteristicTriple& triple,
                           const TestFunction& f, const Trajectory& traj,
                           double t,
                           GeneratorKind kind = GeneratorKind::MeasureValued,
                           const QuadratureOptions& opts = {}) {
  t = std::min(t, traj.end_time());
  double generator_sum = 0.0;
  double seg_time = 0.0;
  double seg_state = traj.initial_state;
  for (std::size_t n = 0; n <= traj.jumps.size(); ++n) {
    const double seg_end =
        n < traj.jumps.size() ? std::min(traj.jumps[n].time, t) : t;
    const double len = seg_end - seg_time;
    if (len > 0.0) {
      if (kind == GeneratorKind::MeasureValued) {
        generator_sum += apply_generator(triple, f, seg_state, len, opts);
      } else {
        const std::vector<double> cuts =
            detail::merged_schedule(triple, f, seg_state, len);
        const double x0 = seg_state;
        generator_sum += integrate_with_breakpoints(
            [&](double s) {
              return extended_generator(triple, f, triple.flow.map(s, x0),
                                        /*check_constraints=*/false);
            },
            0.0, len, cuts, opts);
      }
    }
    if (n >= traj.jumps.size() || traj.jumps[n].time > t) break;
    seg_time = traj.jumps[n].time;
    seg_state = traj.jumps[n].post_state;
  }
  return f.value(traj.state_at(triple.flow, t)) -
         f.value(traj.initial_state) - generator_sum;
}

struct MartingaleStats {
  double mean = 0.0;
  double standard_error = 0.0;
  double z_score = 0.0;
  std::size_t n_paths = 0;
};

struct MartingaleTestOptions {
  GeneratorKind kind = GeneratorKind::MeasureValued;
  double bias_rate = 0.0;  // adds bias_rate * t to the generator sum
  unsigned n_threads = 1;
  std::size_t max_jumps = 1000000;
};

/// Monte Carlo verdict on the local-martingale property of M^f: simulates
/// n_paths independent paths and returns sample statistics of M^f_t.  An
/// in-domain f should give |z| within the CLT band; an injected bias or a
/// violated constraint shows up as drift.
inline MartingaleStats martingale_test(const CharacteristicTriple& triple,
                                       const TestFunction& f, double x,
                                       double t, std::size_t n_paths,
                                       std::uint64_t seed,
                                       const MartingaleTestOptions& options =
                                           {},
                                       const QuadratureOptions& opts = {}) {
  std::vector<double> samples(n_paths);
  parallel_for(n_paths, options.n_threads, [&](std::size_t i) {
    RngStream rng(seed, i);
    const Trajectory traj =
        sample_path(triple, x, t, rng, options.max_jumps, opts);
    double m = ito_residual(triple, f, traj, t, options.kind, opts);
    if (options.bias_rate != 0.0) {
      m -= options.bias_rate * std::min(t, traj.end_time());
    }
    samples[i] = m;
  });
  MartingaleStats stats;
  stats.n_paths = n_paths;
  double sum = 0.0;
  for (double v : samples) sum += v;
  stats.mean = sum / static_cast<double>(n_paths);
  double ss = 0.0;
  for (double v : samples) ss += (v - stats.mean) * (v - stats.mean);
  const double variance =
      n_paths > 1 ? ss / static_cast<double>(n_paths - 1) : 0.0;
  stats.standard_error = std::sqrt(variance / static_cast<double>(n_paths));
  stats.z_score = stats.standard_error > 0.0
                      ? stats.mean / stats.standard_error
                      : (stats.mean == 0.0 ? 0.0 : kInfinity);
  return stats;
}

}  // namespace pdmp
