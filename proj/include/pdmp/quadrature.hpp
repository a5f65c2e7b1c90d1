#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "pdmp/errors.hpp"

namespace pdmp {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_depth = 48;
};

namespace detail {

// Gauss-Kronrod 7-15 pair on [-1,1].  Kronrod nodes in ascending |x|;
// even indices are the embedded Gauss-7 nodes.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.000000000000000, 0.207784955007898, 0.405845151377397,
    0.586087235467691, 0.741531185599394, 0.864864423359769,
    0.949107912342759, 0.991455371120813};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.209482141084728, 0.204432940075298, 0.190350578064785,
    0.169004726639267, 0.140653259715525, 0.104790010322250,
    0.063092092629979, 0.022935322010529};

// Gauss-7 weights for Kronrod nodes 0, 2, 4, 6.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870};

struct PanelResult {
  double value;
  double error;
};

template <typename F>
PanelResult gk15(F&& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double kron = 0.0;
  double gauss = 0.0;
  for (std::size_t i = 0; i < kKronrodNodes.size(); ++i) {
    const double offset = half * kKronrodNodes[i];
    double sum;
    if (i == 0) {
      sum = f(mid);
    } else {
      sum = f(mid - offset) + f(mid + offset);
    }
    if (!std::isfinite(sum)) {
      std::ostringstream oss;
      oss << "non-finite integrand on [" << a << ", " << b << "]";
      throw IntegrabilityError(oss.str());
    }
    kron += kKronrodWeights[i] * sum;
    if (i % 2 == 0) gauss += kGaussWeights[i / 2] * sum;
  }
  kron *= half;
  gauss *= half;
  return {kron, std::abs(kron - gauss)};
}

struct Panel {
  double a;
  double b;
  double value;
  double error;
};

// Worklist refinement with a global error budget: repeatedly split the
// panel with the worst error estimate.  Unlike per-panel tolerance
// splitting, this converges on integrands with isolated jumps or kinks
// (the error near a jump shrinks linearly with the panel width).
template <typename F>
double integrate_adaptive(F&& f, double a, double b, double abs_tol,
                          double rel_tol, int max_depth) {
  PanelResult first = gk15(f, a, b);
  if (first.error <= std::max(abs_tol, rel_tol * std::abs(first.value))) {
    return first.value;
  }
  std::vector<Panel> panels;
  panels.push_back({a, b, first.value, first.error});
  const std::size_t max_panels =
      static_cast<std::size_t>(64) * static_cast<std::size_t>(max_depth);
  double total = 0.0;
  double err = 0.0;
  while (panels.size() < max_panels) {
    total = 0.0;
    err = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < panels.size(); ++i) {
      total += panels[i].value;
      err += panels[i].error;
      if (panels[i].error > panels[worst].error) worst = i;
    }
    if (err <= std::max(abs_tol, rel_tol * std::abs(total))) return total;
    const Panel p = panels[worst];
    const double mid = 0.5 * (p.a + p.b);
    if (!(mid > p.a && mid < p.b)) {
      // Panel no longer splittable at double precision; accept its estimate.
      panels[worst].error = 0.0;
      continue;
    }
    const PanelResult left = gk15(f, p.a, mid);
    const PanelResult right = gk15(f, mid, p.b);
    panels[worst] = {p.a, mid, left.value, left.error};
    panels.push_back({mid, p.b, right.value, right.error});
  }
  // Refinement exhausted.  Accept results that reached the target up to a
  // bounded forgiveness factor (roundoff/noise floor on integrals of tiny
  // absolute scale); anything worse is a genuine integrability failure.
  if (err <= 1e3 * std::max(abs_tol, rel_tol * std::abs(total))) {
    return total;
  }
  double worst_a = a;
  double worst_b = b;
  double worst_err = 0.0;
  for (const Panel& p : panels) {
    if (p.error > worst_err) {
      worst_err = p.error;
      worst_a = p.a;
      worst_b = p.b;
    }
  }
  std::ostringstream oss;
  oss << "quadrature failed to converge on [" << worst_a << ", " << worst_b
      << "] (total error " << err << ", worst panel error " << worst_err
      << ")";
  throw IntegrabilityError(oss.str());
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integral of f over [a,b].
template <typename F>
double integrate(F&& f, double a, double b,
                 const QuadratureOptions& opts = {}) {
  if (a == b) return 0.0;
  if (b < a) return -integrate(std::forward<F>(f), b, a, opts);
  return detail::integrate_adaptive(f, a, b, opts.abs_tol, opts.rel_tol,
                                    opts.max_depth);
}

/// Integral of f over [a,b] with forced panel splits at the given
/// breakpoints.  Integrands here are smooth between splits; the splits keep
/// jump discontinuities at panel edges where Gauss nodes never land.
template <typename F>
double integrate_with_breakpoints(F&& f, double a, double b,
                                  const std::vector<double>& breakpoints,
                                  const QuadratureOptions& opts = {}) {
  if (a == b) return 0.0;
  std::vector<double> cuts;
  cuts.push_back(a);
  for (double s : breakpoints) {
    if (s > a && s < b) cuts.push_back(s);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] <= 0.0) continue;
    total += integrate(f, cuts[i], cuts[i + 1], opts);
  }
  return total;
}

/// Integral of f over [a, infinity), by doubling cutoffs until the increment
/// is negligible.  Throws IntegrabilityError when the tail does not die out.
template <typename F>
double integrate_semi_infinite(F&& f, double a,
                               const QuadratureOptions& opts = {}) {
  double total = 0.0;
  double left = a;
  double len = 1.0;
  for (int k = 0; k < 64; ++k) {
    const double inc = integrate(f, left, left + len, opts);
    total += inc;
    left += len;
    len *= 2.0;
    if (std::abs(inc) <=
        std::max(opts.abs_tol, opts.rel_tol * std::abs(total)) &&
        k >= 3) {
      return total;
    }
  }
  std::ostringstream oss;
  oss << "semi-infinite integral from " << a
      << " did not converge (cutoff reached " << left << ")";
  throw IntegrabilityError(oss.str());
}

/// Cached cumulative integral s -> int_0^s density(u) du on [0, end].
/// Panels are refined once at construction so that point evaluation costs a
/// single non-adaptive Gauss-Kronrod pass over a short, already-smooth cell.
class CumulativeIntegral {
 public:
  CumulativeIntegral() = default;

  template <typename F>
  CumulativeIntegral(F density, double end,
                     const std::vector<double>& breakpoints,
                     const QuadratureOptions& opts = {})
      : density_(std::move(density)), end_(end) {
    knots_.push_back(0.0);
    cum_.push_back(0.0);
    std::vector<double> cuts;
    cuts.push_back(0.0);
    for (double s : breakpoints) {
      if (s > 0.0 && s < end) cuts.push_back(s);
    }
    cuts.push_back(end);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      if (cuts[i + 1] - cuts[i] > 0.0) refine(cuts[i], cuts[i + 1], opts, 0);
    }
  }

  double end() const { return end_; }

  double operator()(double s) const {
    if (s <= 0.0) return 0.0;
    if (s > end_ * (1.0 + 1e-12) + 1e-300) {
      std::ostringstream oss;
      oss << "cumulative integral evaluated at " << s
          << " beyond domain end " << end_;
      throw PathDomainError(oss.str());
    }
    s = std::min(s, end_);
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - knots_.begin()) - 1;
    if (knots_[k] == s) return cum_[k];
    return cum_[k] + detail::gk15(density_, knots_[k], s).value;
  }

 private:
  void refine(double a, double b, const QuadratureOptions& opts, int depth) {
    const auto r = detail::gk15(density_, a, b);
    if (r.error <= std::max(opts.abs_tol, opts.rel_tol * std::abs(r.value)) ||
        depth >= opts.max_depth) {
      knots_.push_back(b);
      cum_.push_back(cum_.back() + r.value);
      return;
    }
    const double mid = 0.5 * (a + b);
    refine(a, mid, opts, depth + 1);
    refine(mid, b, opts, depth + 1);
  }

  std::function<double(double)> density_;
  double end_ = 0.0;
  std::vector<double> knots_;
  std::vector<double> cum_;
};

}  // namespace pdmp
