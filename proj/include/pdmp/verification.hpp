#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pdmp/generator.hpp"
#include "pdmp/models.hpp"
#include "pdmp/process.hpp"
#include "pdmp/value.hpp"

namespace pdmp::verification {

struct CheckResult {
  std::string check_id;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct VerifyScale {
  int law_cases = 200;            // randomized algebraic-law samples
  std::size_t sampling_draws = 20000;
  std::size_t martingale_paths = 2000;
  std::size_t value_paths = 10000;
  double mc_horizon = 50.0;
  unsigned n_threads = 1;
};

namespace detail {

inline CheckResult bounded(const std::string& id, double statistic,
                           double threshold) {
  return {id, statistic, threshold, statistic <= threshold};
}

inline double ks_statistic(std::vector<double> samples,
                           const PathHazard& hazard) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  std::size_t i = 0;
  while (i < samples.size()) {
    const double s = samples[i];
    std::size_t j = i;
    while (j < samples.size() && samples[j] == s) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(j) / n -
                                     (1.0 - hazard.survival(s))));
    worst = std::max(worst, std::abs(static_cast<double>(i) / n -
                                     (1.0 - hazard.survival_left(s))));
    i = j;
  }
  return worst;
}

}  // namespace detail

/// Stieltjes roundtrip sexp(slog F) = F over a compact built-in corpus.
inline std::vector<CheckResult> stieltjes_checks() {
  std::vector<CheckResult> out;
  struct Entry {
    std::string name;
    MFunction F;
    double tol;
  };
  std::vector<Entry> corpus;
  corpus.push_back({"ac", MFunction(FVFunction(
                              1.0, 6.0,
                              [](double t) { return -0.7 * std::exp(-0.7 * t); },
                              {}, [](double t) { return std::exp(-0.7 * t); })),
                    1e-8});
  corpus.push_back(
      {"atoms",
       MFunction(FVFunction(1.0, 3.0, nullptr,
                            {Atom{0.5, -0.2}, Atom{1.5, -0.4}, Atom{3.0, -0.2}})),
       1e-10});
  {
    auto value = [](double t) {
      return std::exp(-t) * std::pow(0.5, std::floor(t + 1e-12));
    };
    std::vector<Atom> atoms;
    for (int k = 1; k <= 2; ++k) {
      atoms.push_back(
          {double(k), -0.5 * std::exp(-double(k)) * std::pow(0.5, k - 1)});
    }
    corpus.push_back({"mixed",
                      MFunction(FVFunction(
                          1.0, 2.5, [value](double t) { return -value(t); },
                          atoms, value)),
                      1e-8});
  }
  for (const auto& entry : corpus) {
    const MFunction G = sexp(slog(entry.F));
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double t = entry.F.domain_end() * i / 100.0;
      worst = std::max(worst, std::abs(G(t) - entry.F(t)));
    }
    out.push_back(
        detail::bounded("stieltjes.roundtrip." + entry.name, worst, entry.tol));
  }
  return out;
}

/// Flow semigroup / killing consistency / functional additivity /
/// multiplicative survival / kernel flow-invariance, randomized per model.
inline std::vector<CheckResult> law_checks(const models::ModelInstance& model,
                                           const VerifyScale& scale,
                                           std::uint64_t seed) {
  const auto& triple = model.triple;
  RngStream rng(seed, 0);
  double semigroup = 0.0;
  double killing = 0.0;
  double additivity = 0.0;
  double multiplicative = 0.0;
  double invariance = 0.0;
  const double lo = model.metadata.grid_lo;
  const double hi = model.name == "davis_boundary" ? 0.99
                                                   : model.metadata.grid_hi;
  for (int i = 0; i < scale.law_cases; ++i) {
    const double x = rng.uniform(lo, hi);
    const double c = triple.flow.killing(x);
    const double span = std::isfinite(c) ? 0.45 * c : 2.0;
    const double s = rng.uniform(0.0, span);
    const double t = rng.uniform(0.0, span);
    semigroup = std::max(
        semigroup, std::abs(triple.flow.map(t, triple.flow.map(s, x)) -
                            triple.flow.map(s + t, x)));
    if (std::isfinite(c)) {
      killing = std::max(
          killing, std::abs(triple.flow.killing(triple.flow.map(t, x)) -
                            (c - t)));
    }
    additivity = std::max(
        additivity,
        std::abs(check_additivity(model.default_reward, triple.flow, x, s, t)));
    additivity = std::max(
        additivity,
        std::abs(check_additivity(triple.hazard, triple.flow, x, s, t)));
    multiplicative = std::max(
        multiplicative,
        std::abs(survival(triple, x, s + t) -
                 survival(triple, x, s) *
                     survival(triple, triple.flow.map(s, x), t)));
    auto probe = [](double y) { return std::sin(y); };
    invariance = std::max(
        invariance,
        std::abs(triple.kernel.integrate(triple.flow.map(s + t, x), probe) -
                 triple.kernel.integrate(
                     triple.flow.map(t, triple.flow.map(s, x)), probe)));
  }
  return {
      detail::bounded(model.name + ".flow.semigroup", semigroup, 1e-8),
      detail::bounded(model.name + ".flow.killing", killing, 1e-8),
      detail::bounded(model.name + ".functional.additivity", additivity, 1e-8),
      detail::bounded(model.name + ".survival.multiplicative", multiplicative,
                      1e-8),
      detail::bounded(model.name + ".kernel.flow_invariance", invariance,
                      1e-8),
  };
}

inline std::vector<CheckResult> sampling_checks(const VerifyScale& scale,
                                                std::uint64_t seed) {
  std::vector<CheckResult> out;
  // Mixed hazard: KS against the survival law.
  {
    const auto model = models::build("davis_boundary", {{"lambda", 0.8}});
    const double x = 0.2;
    PathHazard hazard(model.triple.flow, model.triple.hazard, x, 10.0);
    RngStream rng(seed, 1);
    std::vector<double> samples;
    samples.reserve(scale.sampling_draws);
    for (std::size_t i = 0; i < scale.sampling_draws; ++i) {
      const auto s = sample_jump_time(model.triple, x, rng.uniform01(), 10.0);
      samples.push_back(s.tau);
    }
    out.push_back(detail::bounded("sampling.ks.mixed",
                                  detail::ks_statistic(samples, hazard),
                                  0.01));
  }
  // Quasi-step geometric masses, pooled z-statistic on the first cell.
  {
    const double p = 0.3;
    const auto model = models::build("quasi_step_maintenance", {{"p", p}});
    RngStream rng(seed, 2);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scale.sampling_draws; ++i) {
      const auto s =
          sample_jump_time(model.triple, 0.0, rng.uniform01(), 200.0);
      if (std::llround(s.tau) == 1) ++hits;
    }
    const double n = static_cast<double>(scale.sampling_draws);
    const double z = (static_cast<double>(hits) / n - p) /
                     std::sqrt(p * (1.0 - p) / n);
    out.push_back(detail::bounded("sampling.quasi_step.geometric",
                                  std::abs(z), 4.0));
  }
  // Davis: the first jump is the boundary time, always.
  {
    const auto model = models::build("davis_boundary", {{"lambda", 0.0}});
    RngStream rng(seed, 3);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const double x = rng.uniform(0.0, 0.95);
      const auto s = sample_jump_time(model.triple, x, rng.uniform01(), 10.0);
      worst = std::max(worst, std::abs(s.tau - (1.0 - x)));
      if (!s.at_boundary()) worst = 1.0;
    }
    out.push_back(detail::bounded("sampling.davis.boundary_time", worst, 1e-10));
  }
  return out;
}

inline std::vector<CheckResult> martingale_checks(
    const models::ModelInstance& model, const VerifyScale& scale,
    std::uint64_t seed) {
  std::vector<CheckResult> out;
  const double horizon = std::min(model.metadata.default_horizon, 8.0);
  MartingaleTestOptions options;
  options.n_threads = scale.n_threads;
  for (const auto& nf : model.test_functions) {
    const auto stats =
        martingale_test(model.triple, nf.f, model.triple.probe_states.front(),
                        horizon, scale.martingale_paths, seed, options);
    out.push_back(detail::bounded(
        model.name + ".martingale." + nf.name, std::abs(stats.z_score), 4.0));
  }
  return out;
}

inline std::vector<CheckResult> value_checks(const VerifyScale& scale,
                                             std::uint64_t seed) {
  std::vector<CheckResult> out;
  const double delta = 0.5;
  for (const char* name :
       {"drift_only", "drift_poisson_reset", "cramer_lundberg",
        "quasi_step_maintenance"}) {
    const auto model = models::build(name);
    const ValueSpec spec = model.make_value_spec(delta);
    const double x = name == std::string("cramer_lundberg") ? 2.0 : 0.5;
    McOptions options;
    options.n_threads = scale.n_threads;
    const auto mc = mc_value(model.triple, spec, x, scale.mc_horizon,
                             scale.value_paths, seed, options);
    const double expected = model.oracles.value_default(x, delta);
    const double budget =
        4.0 * mc.standard_error + mc.truncation_bound + 1e-9;
    out.push_back(detail::bounded(std::string(name) + ".value.mc_vs_oracle",
                                  std::abs(mc.estimate - expected), budget));
  }
  // Reproducibility of the Monte Carlo across thread counts.
  {
    const auto model = models::build("drift_poisson_reset");
    const ValueSpec spec = model.make_value_spec(delta);
    double reference = 0.0;
    double worst = 0.0;
    for (unsigned threads : {1u, 2u, 8u}) {
      McOptions options;
      options.n_threads = threads;
      const auto mc =
          mc_value(model.triple, spec, 0.5, 20.0, 2000, seed, options);
      if (threads == 1u) {
        reference = mc.estimate;
      } else {
        worst = std::max(worst, std::abs(mc.estimate - reference));
      }
    }
    out.push_back(detail::bounded("value.mc.thread_reproducibility", worst,
                                  0.0));
  }
  return out;
}

inline std::vector<CheckResult> generator_constraint_checks(
    const VerifyScale& scale, std::uint64_t seed) {
  std::vector<CheckResult> out;
  const auto model = models::build("davis_boundary", {{"lambda", 0.0}});
  TestFunction violating;
  violating.value = [](double x) { return x * x; };
  violating.path_rate = [](double z) { return 2.0 * z; };
  violating.path_jump = [](double) { return 0.0; };
  violating.jump_schedule = [](double, double) {
    return std::vector<double>{};
  };
  constexpr double kAlpha = -11.0 / 9.0;
  TestFunction corrected;
  corrected.value = [](double x) { return x * x + kAlpha * x; };
  corrected.path_rate = [](double z) { return 2.0 * z + kAlpha; };
  corrected.path_jump = [](double) { return 0.0; };
  corrected.jump_schedule = [](double, double) {
    return std::vector<double>{};
  };

  const auto bad = constraint_check(model.triple, violating, 0.0, 1.0);
  out.push_back({"davis.constraint.violation_detected",
                 bad.max_abs_residual, 1e-8, !bad.pass});
  const auto good = constraint_check(model.triple, corrected, 0.0, 1.0);
  out.push_back({"davis.constraint.corrected_passes", good.max_abs_residual,
                 1e-8, good.pass});

  MartingaleTestOptions options;
  options.kind = GeneratorKind::Extended;
  options.n_threads = scale.n_threads;
  const auto drift = martingale_test(model.triple, violating, 0.0, 5.0,
                                     scale.martingale_paths, seed, options);
  out.push_back({"davis.martingale.violation_drifts",
                 std::abs(drift.z_score), 4.0, std::abs(drift.z_score) > 4.0});
  const auto centered = martingale_test(model.triple, corrected, 0.0, 5.0,
                                        scale.martingale_paths, seed, options);
  out.push_back({"davis.martingale.corrected_centers",
                 std::abs(centered.z_score), 4.0,
                 std::abs(centered.z_score) <= 4.0});
  return out;
}

/// Runs the requested suite ("all", "stieltjes", "laws", "sampling",
/// "martingale", "value", "constraint").
inline std::vector<CheckResult> run_suite(const std::string& suite,
                                          const VerifyScale& scale,
                                          std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto append = [&](std::vector<CheckResult> more) {
    out.insert(out.end(), more.begin(), more.end());
  };
  const bool all = suite == "all";
  if (all || suite == "stieltjes") append(stieltjes_checks());
  if (all || suite == "laws") {
    for (const auto& name : models::model_names()) {
      append(law_checks(models::build(name), scale, seed));
    }
  }
  if (all || suite == "sampling") append(sampling_checks(scale, seed));
  if (all || suite == "martingale") {
    for (const auto& name : models::model_names()) {
      append(martingale_checks(models::build(name), scale, seed));
    }
  }
  if (all || suite == "value") append(value_checks(scale, seed));
  if (all || suite == "constraint") {
    append(generator_constraint_checks(scale, seed));
  }
  if (out.empty()) {
    throw ConfigError("unknown verification suite '" + suite + "'");
  }
  return out;
}

}  // namespace pdmp::verification
