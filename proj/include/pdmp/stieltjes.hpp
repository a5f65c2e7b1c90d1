#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "pdmp/errors.hpp"
#include "pdmp/quadrature.hpp"

namespace pdmp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Comparison slack for atom times.  Schedules produce exact closed-form
// times, so this only absorbs representation noise.
inline constexpr double kAtomTimeTol = 1e-12;

struct Atom {
  double time;
  double size;
};

/// A right-continuous finite-variation function on [0, domain_end), stored
/// as an absolutely continuous density plus a finite atom list.  There is no
/// singular-continuous slot: that part is structurally zero here.
///
/// g(t) = value_at_zero + int_0^t ac_density(s) ds + sum_{s <= t} size(s).
class FVFunction {
 public:
  using Density = std::function<double(double)>;

  FVFunction() : FVFunction(0.0, 0.0, nullptr, {}) {}

  FVFunction(double value_at_zero, double domain_end, Density ac_density,
             std::vector<Atom> atoms, Density exact_value = nullptr)
      : value_at_zero_(value_at_zero),
        domain_end_(domain_end),
        ac_density_(std::move(ac_density)),
        atoms_(std::move(atoms)),
        exact_value_(std::move(exact_value)) {
    if (!(domain_end_ >= 0.0)) {
      throw ModelError("FVFunction: domain_end must be nonnegative");
    }
    double prev = 0.0;
    for (const Atom& a : atoms_) {
      if (!(a.time > prev)) {
        std::ostringstream oss;
        oss << "FVFunction: atom times must be strictly increasing in "
               "(0, domain_end]; offending time "
            << a.time;
        throw ModelError(oss.str());
      }
      if (a.time > domain_end_ * (1.0 + kAtomTimeTol)) {
        std::ostringstream oss;
        oss << "FVFunction: atom at " << a.time << " beyond domain end "
            << domain_end_;
        throw ModelError(oss.str());
      }
      prev = a.time;
    }
  }

  static FVFunction zero(double domain_end) {
    return FVFunction(0.0, domain_end, [](double) { return 0.0; }, {});
  }

  double value_at_zero() const { return value_at_zero_; }
  double domain_end() const { return domain_end_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const Density& ac_density() const { return ac_density_; }
  bool has_exact_value() const { return static_cast<bool>(exact_value_); }

  double density_at(double s) const {
    return ac_density_ ? ac_density_(s) : 0.0;
  }

  /// int_0^t ac_density(s) ds.
  double ac_integral(double t, const QuadratureOptions& opts = {}) const {
    check_time(t);
    if (!ac_density_) return 0.0;
    if (exact_value_) return exact_value_(t) - value_at_zero_ - atom_sum(t);
    std::vector<double> cuts;
    cuts.reserve(atoms_.size());
    for (const Atom& a : atoms_) cuts.push_back(a.time);
    return integrate_with_breakpoints(ac_density_, 0.0, t, cuts, opts);
  }

  /// sum of atom sizes with time <= t.
  double atom_sum(double t) const {
    double s = 0.0;
    for (const Atom& a : atoms_) {
      if (a.time > t + kAtomTimeTol) break;
      s += a.size;
    }
    return s;
  }

  double atom_size_at(double t) const {
    for (const Atom& a : atoms_) {
      if (std::abs(a.time - t) <= kAtomTimeTol) return a.size;
      if (a.time > t) break;
    }
    return 0.0;
  }

  double operator()(double t, const QuadratureOptions& opts = {}) const {
    check_time(t);
    if (exact_value_) return exact_value_(t);
    return value_at_zero_ + ac_integral(t, opts) + atom_sum(t);
  }

  double left_limit(double t, const QuadratureOptions& opts = {}) const {
    return (*this)(t, opts) - atom_size_at(t);
  }

 private:
  void check_time(double t) const {
    if (t < 0.0 || t > domain_end_ * (1.0 + kAtomTimeTol) + 1e-300) {
      std::ostringstream oss;
      oss << "time " << t << " outside [0, " << domain_end_ << "]";
      throw PathDomainError(oss.str());
    }
  }

  double value_at_zero_;
  double domain_end_;
  Density ac_density_;
  std::vector<Atom> atoms_;
  Density exact_value_;
};

/// Lebesgue-Stieltjes integral int_{(0,t]} g dmu.  The density part uses
/// adaptive quadrature split at atom times (plus any known discontinuity
/// times of g passed as extra breakpoints); atoms are evaluated exactly.
template <typename G>
double ls_integral(G&& g, const FVFunction& mu, double t,
                   const std::vector<double>& g_breakpoints,
                   const QuadratureOptions& opts = {}) {
  if (t < 0.0 || t > mu.domain_end() * (1.0 + kAtomTimeTol) + 1e-300) {
    std::ostringstream oss;
    oss << "ls_integral: time " << t << " outside [0, " << mu.domain_end()
        << "]";
    throw PathDomainError(oss.str());
  }
  double total = 0.0;
  if (mu.ac_density()) {
    std::vector<double> cuts;
    cuts.reserve(mu.atoms().size() + g_breakpoints.size());
    for (const Atom& a : mu.atoms()) cuts.push_back(a.time);
    cuts.insert(cuts.end(), g_breakpoints.begin(), g_breakpoints.end());
    total += integrate_with_breakpoints(
        [&](double s) { return g(s) * mu.ac_density()(s); }, 0.0, t, cuts,
        opts);
  }
  for (const Atom& a : mu.atoms()) {
    if (a.time > t + kAtomTimeTol) break;
    total += g(a.time) * a.size;
  }
  return total;
}

template <typename G>
double ls_integral(G&& g, const FVFunction& mu, double t,
                   const QuadratureOptions& opts = {}) {
  return ls_integral(std::forward<G>(g), mu, t, {}, opts);
}

/// Survival-type function: right continuous, nonincreasing, F(0)=1,
/// values in [0,1].  Atom sizes d satisfy -F(t-) <= d <= 0.
class MFunction {
 public:
  explicit MFunction(FVFunction fv) : fv_(std::move(fv)) {
    if (fv_.value_at_zero() != 1.0) {
      throw ModelError("MFunction: F(0) must equal 1");
    }
    for (const Atom& a : fv_.atoms()) {
      if (a.size > 0.0) {
        throw ModelError("MFunction: atoms must be nonpositive");
      }
      const double before = fv_.left_limit(a.time);
      if (before + a.size < -1e-12) {
        std::ostringstream oss;
        oss << "MFunction: atom at " << a.time << " of size " << a.size
            << " drives F below zero (F(t-) = " << before << ")";
        throw ModelError(oss.str());
      }
    }
  }

  const FVFunction& fv() const { return fv_; }
  double domain_end() const { return fv_.domain_end(); }
  double operator()(double t) const { return fv_(t); }
  double left_limit(double t) const { return fv_.left_limit(t); }

 private:
  FVFunction fv_;
};

/// Hazard-type function: right continuous, nondecreasing, L(0)=0.  Atom
/// sizes lie in (0,1); size exactly 1 is permitted only for the final atom
/// at domain_end (a forced jump at the flow boundary).
class AFunction {
 public:
  explicit AFunction(FVFunction fv) : fv_(std::move(fv)) {
    if (fv_.value_at_zero() != 0.0) {
      throw ModelError("AFunction: Lambda(0) must equal 0");
    }
    const auto& atoms = fv_.atoms();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const Atom& a = atoms[i];
      const bool terminal =
          (i + 1 == atoms.size()) &&
          std::abs(a.time - fv_.domain_end()) <= kAtomTimeTol;
      if (a.size <= 0.0 || a.size > 1.0 || (a.size == 1.0 && !terminal)) {
        std::ostringstream oss;
        oss << "AFunction: atom at " << a.time << " of size " << a.size
            << " must lie in (0,1), with 1 only at domain_end";
        throw ModelError(oss.str());
      }
    }
  }

  const FVFunction& fv() const { return fv_; }
  double domain_end() const { return fv_.domain_end(); }
  double operator()(double t) const { return fv_(t); }
  double ac_part(double t) const { return fv_.ac_integral(t); }

 private:
  FVFunction fv_;
};

/// Stieltjes logarithm: Lambda(dt) = -F(dt)/F(t-), the increasing-hazard
/// sign convention (the raw integral is nonpositive for a decreasing F).
/// Density part lambda(t) = -F'(t)/F(t-); atom at s gets
/// dLambda(s) = (F(s-)-F(s))/F(s-).
inline AFunction slog(const MFunction& F, const QuadratureOptions& opts = {}) {
  std::vector<Atom> atoms;
  atoms.reserve(F.fv().atoms().size());
  for (const Atom& a : F.fv().atoms()) {
    const double before = F.left_limit(a.time);
    if (!(before > 0.0)) {
      std::ostringstream oss;
      oss << "slog: F(t-) = 0 at t = " << a.time
          << " (killing time reached before domain end "
          << F.domain_end() << ")";
      throw ModelError(oss.str());
    }
    atoms.push_back({a.time, -a.size / before});
  }
  // Copies of F travel inside the density closure; evaluation stays valid
  // after the argument goes out of scope.
  FVFunction fvF = F.fv();
  FVFunction::Density density = nullptr;
  if (fvF.ac_density()) {
    density = [fvF, opts](double s) {
      const double denom = fvF.left_limit(s, opts);
      if (!(denom > 0.0)) {
        std::ostringstream oss;
        oss << "slog: division by F(t-) = " << denom << " at t = " << s;
        throw ModelError(oss.str());
      }
      return -fvF.ac_density()(s) / denom;
    };
  }
  return AFunction(
      FVFunction(0.0, F.domain_end(), std::move(density), std::move(atoms)));
}

/// Stieltjes exponential: F(t) = exp(-Lambda^{ac}(t)) * prod_{s<=t}
/// (1 - dLambda(s)), the atom product computed exactly.
inline MFunction sexp(const AFunction& L, const QuadratureOptions& opts = {}) {
  FVFunction fvL = L.fv();
  const auto& latoms = fvL.atoms();

  // Pre-atom survival values, in atom order.
  std::vector<double> left_values(latoms.size());
  {
    double product = 1.0;
    for (std::size_t i = 0; i < latoms.size(); ++i) {
      left_values[i] = std::exp(-fvL.ac_integral(latoms[i].time, opts)) * product;
      product *= 1.0 - latoms[i].size;
    }
  }

  std::vector<Atom> atoms(latoms.size());
  for (std::size_t i = 0; i < latoms.size(); ++i) {
    atoms[i] = {latoms[i].time, -left_values[i] * latoms[i].size};
  }

  auto evaluate = [fvL, opts](double t) {
    double product = 1.0;
    for (const Atom& a : fvL.atoms()) {
      if (a.time > t + kAtomTimeTol) break;
      product *= 1.0 - a.size;
    }
    return std::exp(-fvL.ac_integral(t, opts)) * product;
  };

  FVFunction::Density density = nullptr;
  if (fvL.ac_density()) {
    density = [fvL, evaluate](double s) {
      return -fvL.ac_density()(s) * evaluate(s);
    };
  }
  return MFunction(FVFunction(1.0, L.domain_end(), std::move(density),
                              std::move(atoms), evaluate));
}

/// Lebesgue decomposition into absolutely continuous and purely discrete
/// parts; the sc part is identically zero by representation.  The initial
/// value rides on the ac part so that ac + pd = mu pointwise.
inline std::pair<FVFunction, FVFunction> decompose(const FVFunction& mu) {
  FVFunction ac(mu.value_at_zero(), mu.domain_end(), mu.ac_density(), {});
  FVFunction pd(0.0, mu.domain_end(), nullptr, mu.atoms());
  return {std::move(ac), std::move(pd)};
}

}  // namespace pdmp
