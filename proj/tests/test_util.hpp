#pragma once

// Helpers shared between the unit suites and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "pdmp/process.hpp"

namespace testutil {

struct MeanSe {
  double mean;
  double se;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  double m = 0.0;
  for (double v : xs) m += v;
  m /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double v : xs) ss += (v - m) * (v - m);
  const double var =
      xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
  return {m, std::sqrt(var / static_cast<double>(xs.size()))};
}

/// Kolmogorov-Smirnov distance between an empirical sample of jump times
/// and the law with survival F(x,.), both one-sided limits evaluated so
/// that atoms are handled exactly.  Samples at the sentinel +inf are not
/// allowed; censor them before calling.
inline double ks_distance(std::vector<double> samples,
                          const pdmp::PathHazard& hazard) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  std::size_t i = 0;
  while (i < samples.size()) {
    const double s = samples[i];
    std::size_t j = i;
    while (j < samples.size() && samples[j] == s) ++j;  // tied block
    const double cdf_right = 1.0 - hazard.survival(s);
    const double cdf_left = 1.0 - hazard.survival_left(s);
    const double emp_hi = static_cast<double>(j) / n;
    const double emp_lo = static_cast<double>(i) / n;
    worst = std::max(worst, std::abs(emp_hi - cdf_right));
    worst = std::max(worst, std::abs(emp_lo - cdf_left));
    i = j;
  }
  return worst;
}

/// Chi-square statistic of observed counts against expected probabilities
/// over the given cells (remaining mass pooled into a final cell).
inline double chi_square(const std::vector<std::int64_t>& observed,
                         const std::vector<double>& expected_probability,
                         std::int64_t total) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double expect = expected_probability[i] * static_cast<double>(total);
    const double diff = static_cast<double>(observed[i]) - expect;
    stat += diff * diff / expect;
  }
  return stat;
}

}  // namespace testutil
