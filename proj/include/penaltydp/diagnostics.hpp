// Copyright 2026 The penaltydp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PENALTYDP_DIAGNOSTICS_HPP_
#define PENALTYDP_DIAGNOSTICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "penaltydp/posterior.hpp"

namespace penaltydp {

inline double sample_mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double sample_variance(const std::vector<double>& x) {
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Effective sample size using the initial-positive-sequence truncation of
// the autocorrelation sum: lags are added while consecutive autocovariance
// pairs stay positive. A constant chain reports 1 by convention.
inline double ess(const std::vector<double>& x) {
  const std::size_t m = x.size();
  if (m < 100) throw std::invalid_argument("ess: need at least 100 samples");

  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mn == *mx) return 1.0;

  const double mean = sample_mean(x);
  std::vector<double> c(x.size());
  for (std::size_t i = 0; i < m; ++i) c[i] = x[i] - mean;

  double gamma0 = 0.0;
  for (double v : c) gamma0 += v * v;
  gamma0 /= static_cast<double>(m);
  if (gamma0 <= 0.0) return 1.0;

  const auto gamma = [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t i = 0; i + t < m; ++i) s += c[i] * c[i + t];
    return s / static_cast<double>(m);
  };

  const std::size_t max_lag = std::min<std::size_t>(m - 1, 5000);
  double rho_sum = 0.0;
  for (std::size_t t = 1; t + 1 <= max_lag; t += 2) {
    const double pair = gamma(t) + gamma(t + 1);
    if (pair <= 0.0) break;
    rho_sum += pair / gamma0;
  }
  const double tau = 1.0 + 2.0 * rho_sum;
  double e = static_cast<double>(m) / tau;
  return std::min(std::max(e, 1.0), static_cast<double>(m));
}

// Two-sided Kolmogorov-Smirnov distance between the samples and the
// truncated analytic posterior.
inline double ks_against_analytic(std::vector<double> samples,
                                  const AnalyticPosterior& post) {
  if (samples.empty()) throw std::invalid_argument("ks_against_analytic: no samples");
  std::sort(samples.begin(), samples.end());
  const double m = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = post.cdf(samples[i]);
    d = std::max(d, std::abs(static_cast<double>(i + 1) / m - f));
    d = std::max(d, std::abs(f - static_cast<double>(i) / m));
  }
  return d;
}

}  // namespace penaltydp

#endif  // PENALTYDP_DIAGNOSTICS_HPP_
