#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/sds.hpp"
#include "pdmp/stieltjes.hpp"

namespace pdmp {

/// Post-jump Markov kernel Q(x, .), as a sampler plus an integrator for
/// int f(y) Q(x, dy).  The two must describe the same measure; an empirical
/// consistency check lives in the verification suite.
struct JumpKernel {
  std::function<double(double, RngStream&)> sampler;
  std::function<double(double, const std::function<double(double)>&)>
      integrator;
  // True when Q(x, .) does not depend on x (reset and re-draw kernels);
  // lets dense consumers hoist int f dQ out of their quadrature loops.
  bool constant_in_state = false;

  double integrate(double x, const std::function<double(double)>& f) const {
    return integrator(x, f);
  }
};

enum class HazardClass { QuasiIto, QuasiStep, MixedNonsingular };

inline const char* to_string(HazardClass c) {
  switch (c) {
    case HazardClass::QuasiIto: return "quasi-ito";
    case HazardClass::QuasiStep: return "quasi-step";
    default: return "mixed-nonsingular";
  }
}

/// The characteristic triple (phi, Lambda, Q) of a general PDMP, plus probe
/// states used by classification and domain diagnostics.
struct CharacteristicTriple {
  Flow flow;
  SdsFunctional hazard;  // rate = lambda >= 0, jump = dLambda in (0,1]
  JumpKernel kernel;
  std::vector<double> probe_states;
  double probe_horizon = 10.0;
};

/// Conditional hazard of one path: atoms and cumulative continuous hazard of
/// Lambda(x, .) on [0, t_cap & c(x)], with survival evaluation and exact
/// inversion of the mixed jump-time law.
class PathHazard {
 public:
  PathHazard(const Flow& flow, const SdsFunctional& hazard, double x,
             double t_cap, const QuadratureOptions& opts = {})
      : x_(x) {
    const double c = flow.killing(x);
    t_end_ = std::min(c, t_cap);
    ends_at_killing_ = std::isfinite(c) && c <= t_cap * (1.0 + kAtomTimeTol);
    if (!(t_end_ >= 0.0) || !std::isfinite(t_end_)) {
      throw ModelError("PathHazard: nonfinite scan horizon");
    }

    for (double s : hazard.schedule(x_, t_end_)) {
      const double size = hazard.jump(flow.state_at(s, x_));
      if (size == 0.0) continue;
      const bool terminal =
          ends_at_killing_ && std::abs(s - t_end_) <= kAtomTimeTol;
      if (size < 0.0 || size > 1.0 || (size == 1.0 && !terminal)) {
        std::ostringstream oss;
        oss << "hazard atom of size " << size << " at path time " << s
            << " is outside (0,1) (1 allowed only at the flow boundary)";
        throw ModelError(oss.str());
      }
      atoms_.push_back({s, size});
    }

    if (hazard.cumulative_rate) {
      cumulative_closed_ = [cum = hazard.cumulative_rate, x](double s) {
        return cum(x, s);
      };
    } else if (hazard.rate) {
      std::vector<double> cuts;
      cuts.reserve(atoms_.size());
      for (const Atom& a : atoms_) cuts.push_back(a.time);
      auto density = [rate = hazard.rate, map = flow.map, x](double s) {
        const double value = rate(map(s, x));
        if (value < 0.0) {
          std::ostringstream oss;
          oss << "negative hazard rate " << value << " at path time " << s;
          throw ModelError(oss.str());
        }
        return value;
      };
      cumulative_cache_ = CumulativeIntegral(density, t_end_, cuts, opts);
      has_cache_ = true;
    }
  }

  double t_end() const { return t_end_; }
  bool ends_at_killing() const { return ends_at_killing_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  bool has_boundary_unit_atom() const {
    return !atoms_.empty() && atoms_.back().size == 1.0;
  }

  /// Lambda^{ac}(x, s) = int_0^s lambda(phi(u,x)) du.
  double cumulative_ac(double s) const {
    if (cumulative_closed_) return cumulative_closed_(s);
    if (has_cache_) return cumulative_cache_(s);
    return 0.0;
  }

  /// F(x,s) = exp(-Lambda^{ac}(s)) prod_{u<=s} (1 - dLambda(u)).
  double survival(double s) const {
    double product = 1.0;
    for (const Atom& a : atoms_) {
      if (a.time > s + kAtomTimeTol) break;
      product *= 1.0 - a.size;
    }
    return std::exp(-cumulative_ac(s)) * product;
  }

  double survival_left(double s) const {
    double product = 1.0;
    for (const Atom& a : atoms_) {
      if (a.time >= s - kAtomTimeTol) break;
      product *= 1.0 - a.size;
    }
    return std::exp(-cumulative_ac(s)) * product;
  }

  struct Inversion {
    bool reached = false;
    double time = kInfinity;
    bool at_atom = false;
    bool at_boundary = false;  // unit atom at the flow boundary
  };

  /// First s in (0, t_end] with integrated hazard
  ///   Lambda^{ac}(s) + sum_{u<=s} -log(1 - dLambda(u)) >= target.
  /// Atoms are scanned in schedule order with exact mass subtraction; the
  /// continuous part is inverted by bisection to time tolerance 1e-10.
  Inversion invert(double target) const {
    double accumulated = 0.0;  // integrated hazard up to segment start
    double seg_start = 0.0;
    double ac_start = 0.0;
    for (const Atom& a : atoms_) {
      const double ac_at_atom = cumulative_ac(a.time);
      if (accumulated + (ac_at_atom - ac_start) >= target) {
        return continuous_crossing(seg_start, a.time, ac_start,
                                   target - accumulated);
      }
      accumulated += ac_at_atom - ac_start;
      ac_start = ac_at_atom;
      seg_start = a.time;
      const double log_keep =
          a.size >= 1.0 ? -kInfinity : std::log1p(-a.size);
      if (accumulated - log_keep >= target) {
        Inversion inv;
        inv.reached = true;
        inv.time = a.time;
        inv.at_atom = true;
        inv.at_boundary = a.size == 1.0 && ends_at_killing_ &&
                          std::abs(a.time - t_end_) <= kAtomTimeTol;
        return inv;
      }
      accumulated -= log_keep;
    }
    const double ac_total = cumulative_ac(t_end_);
    if (accumulated + (ac_total - ac_start) >= target) {
      return continuous_crossing(seg_start, t_end_, ac_start,
                                 target - accumulated);
    }
    return {};
  }

 private:
  Inversion continuous_crossing(double lo, double hi, double ac_lo,
                                double residual) const {
    // cumulative_ac(s) - ac_lo is nondecreasing on [lo, hi] and crosses
    // residual inside; bisect.
    double a = lo;
    double b = hi;
    for (int i = 0; i < 200 && (b - a) > 1e-10; ++i) {
      const double mid = 0.5 * (a + b);
      if (cumulative_ac(mid) - ac_lo >= residual) {
        b = mid;
      } else {
        a = mid;
      }
    }
    Inversion inv;
    inv.reached = true;
    inv.time = b;
    return inv;
  }

  double x_;
  double t_end_ = 0.0;
  bool ends_at_killing_ = false;
  std::vector<Atom> atoms_;
  std::function<double(double)> cumulative_closed_;
  CumulativeIntegral cumulative_cache_;
  bool has_cache_ = false;
};

/// Conditional survival F(x,t) = F^{ac} F^{pd} (the sc factor is 1 here).
inline double survival(const CharacteristicTriple& triple, double x, double t,
                       const QuadratureOptions& opts = {}) {
  detail::check_path_time(triple.flow, x, t);
  PathHazard ph(triple.flow, triple.hazard, x, t, opts);
  return ph.survival(t);
}

struct JumpTimeSample {
  enum class Kind {
    Jump,           // hazard reached inside the interval
    BoundaryJump,   // forced jump at the flow boundary (dLambda = 1)
    BeyondHorizon,  // survival still above u at the scan horizon
    FlowDeath,      // flow ends at finite c(x) with residual survival mass
  };
  Kind kind = Kind::BeyondHorizon;
  double tau = kInfinity;

  bool is_jump() const {
    return kind == Kind::Jump || kind == Kind::BoundaryJump;
  }
  bool at_boundary() const { return kind == Kind::BoundaryJump; }
};

/// Inverts the conditional survival function at the uniform variate u:
/// tau = inf { t >= 0 : F(x,t) <= u }, scanned over (0, min(c(x), t_max)].
/// Monotone in u (larger u gives smaller tau).  If the survival never falls
/// to u within the scan the outcome is a sentinel, never an error.
inline JumpTimeSample sample_jump_time(const CharacteristicTriple& triple,
                                       double x, double u,
                                       double t_max = kInfinity,
                                       const QuadratureOptions& opts = {}) {
  if (!(u > 0.0 && u < 1.0)) {
    throw ModelError("sample_jump_time: u must lie in (0,1)");
  }
  PathHazard ph(triple.flow, triple.hazard, x, t_max, opts);
  const PathHazard::Inversion inv = ph.invert(-std::log(u));
  JumpTimeSample out;
  if (inv.reached) {
    out.kind = inv.at_boundary ? JumpTimeSample::Kind::BoundaryJump
                               : JumpTimeSample::Kind::Jump;
    out.tau = inv.time;
    return out;
  }
  if (ph.ends_at_killing()) {
    out.kind = JumpTimeSample::Kind::FlowDeath;
    out.tau = ph.t_end();
    return out;
  }
  return out;
}

struct TrajectoryJump {
  double time;        // absolute jump time tau_n
  double pre_state;   // X_{tau_n}^- = phi(tau_n - tau_{n-1}, X_{tau_{n-1}})
  double post_state;  // X_{tau_n} ~ Q(pre_state, .)
  bool at_boundary;
};

/// One simulated path: jump times with pre/post states, plus the final flow
/// segment to the horizon.  killed marks a lifetime reached inside the
/// horizon (the flow ran out at finite c(x) with leftover survival mass).
struct Trajectory {
  double initial_state = 0.0;
  double horizon = 0.0;
  std::vector<TrajectoryJump> jumps;
  bool killed = false;
  double death_time = kInfinity;

  double end_time() const { return killed ? death_time : horizon; }

  std::size_t jump_count(double t) const {
    std::size_t n = 0;
    while (n < jumps.size() && jumps[n].time <= t) ++n;
    return n;
  }

  /// Right-continuous state at absolute time t.
  double state_at(const Flow& flow, double t) const {
    double seg_time = 0.0;
    double seg_state = initial_state;
    for (const TrajectoryJump& j : jumps) {
      if (j.time > t) break;
      seg_time = j.time;
      seg_state = j.post_state;
    }
    return flow.state_at(t - seg_time, seg_state);
  }

  /// State just before t (the predictable modification X_t^-).
  double state_before(const Flow& flow, double t) const {
    double seg_time = 0.0;
    double seg_state = initial_state;
    for (const TrajectoryJump& j : jumps) {
      if (j.time >= t) break;
      seg_time = j.time;
      seg_state = j.post_state;
    }
    return flow.state_at(t - seg_time, seg_state);
  }
};

/// Exact path simulation by survival inversion, one uniform per inter-jump
/// time and one kernel draw per jump.
inline Trajectory sample_path(const CharacteristicTriple& triple, double x,
                              double horizon, RngStream& rng,
                              std::size_t max_jumps = 1000000,
                              const QuadratureOptions& opts = {}) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ModelError("sample_path: horizon must be finite and positive");
  }
  Trajectory traj;
  traj.initial_state = x;
  traj.horizon = horizon;
  double now = 0.0;
  double state = x;
  while (true) {
    const double remaining = horizon - now;
    if (remaining <= 0.0) break;
    const JumpTimeSample s =
        sample_jump_time(triple, state, rng.uniform01(), remaining, opts);
    if (s.kind == JumpTimeSample::Kind::BeyondHorizon) break;
    if (s.kind == JumpTimeSample::Kind::FlowDeath) {
      traj.killed = true;
      traj.death_time = now + s.tau;
      break;
    }
    const double pre = s.at_boundary() && triple.flow.boundary_point
                           ? triple.flow.boundary_point(state)
                           : triple.flow.map(s.tau, state);
    const double post = triple.kernel.sampler(pre, rng);
    now += s.tau;
    traj.jumps.push_back({now, pre, post, s.at_boundary()});
    state = post;
    if (traj.jumps.size() >= max_jumps) {
      std::ostringstream oss;
      oss << "jump-count cap " << max_jumps
          << " exceeded; trailing jump times:";
      const std::size_t first =
          traj.jumps.size() > 8 ? traj.jumps.size() - 8 : 0;
      for (std::size_t i = first; i < traj.jumps.size(); ++i) {
        oss << ' ' << traj.jumps[i].time;
      }
      throw ExplosionError(oss.str());
    }
  }
  return traj;
}

/// Integral of f against the compensator nu of the jumping measure:
///   int_{(0,t] x E} f dnu = sum_n int_{(tau_n, t & tau_{n+1}]}
///     [ int f(s,y) q(X_{tau_n}, s - tau_n, dy) ] Lambda(X_{tau_n}, ds),
/// atoms handled exactly.  f takes (absolute time, post-jump state).
inline double compensator(const CharacteristicTriple& triple,
                          const Trajectory& traj, double t,
                          const std::function<double(double, double)>& f,
                          const QuadratureOptions& opts = {}) {
  t = std::min(t, traj.end_time());
  double total = 0.0;
  double seg_time = 0.0;
  double seg_state = traj.initial_state;
  for (std::size_t n = 0; n <= traj.jumps.size(); ++n) {
    const double seg_end =
        n < traj.jumps.size() ? std::min(traj.jumps[n].time, t) : t;
    const double len = seg_end - seg_time;
    if (len > 0.0) {
      FVFunction lam =
          restrict_to_path(triple.hazard, triple.flow, seg_state, len);
      const double base = seg_time;
      const double x0 = seg_state;
      total += ls_integral(
          [&](double u) {
            const double z = triple.flow.state_at(u, x0);
            return triple.kernel.integrate(
                z, [&](double y) { return f(base + u, y); });
          },
          lam, len, opts);
    }
    if (n >= traj.jumps.size() || traj.jumps[n].time > t) break;
    seg_time = traj.jumps[n].time;
    seg_state = traj.jumps[n].post_state;
  }
  return total;
}

/// Hazard classification over the probe states: quasi-Ito when no scheduled
/// atoms appear and the rate is not identically zero; quasi-step when the
/// rate vanishes along probe paths; mixed-nonsingular otherwise.
inline HazardClass classify(const CharacteristicTriple& triple) {
  bool has_atoms = false;
  bool has_rate = false;
  for (double x : triple.probe_states) {
    const double horizon =
        std::min(triple.probe_horizon, triple.flow.killing(x));
    if (!triple.hazard.schedule(x, horizon).empty()) has_atoms = true;
    if (triple.hazard.rate) {
      constexpr int kProbePoints = 64;
      for (int i = 0; i <= kProbePoints; ++i) {
        const double s = horizon * i / kProbePoints;
        if (triple.hazard.rate(triple.flow.map(s, x)) != 0.0) {
          has_rate = true;
          break;
        }
      }
    }
  }
  if (!has_rate) return HazardClass::QuasiStep;
  if (!has_atoms) return HazardClass::QuasiIto;
  return HazardClass::MixedNonsingular;
}

}  // namespace pdmp
