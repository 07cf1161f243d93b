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

#ifndef PENALTYDP_PRIVACY_HPP_
#define PENALTYDP_PRIVACY_HPP_

#include <cmath>
#include <cstdint>
#include <limits>

#include "penaltydp/accept_math.hpp"
#include "penaltydp/errors.hpp"

// Privacy accounting for chains that release one noisy log-likelihood
// difference per iteration through a Gaussian mechanism.
//
// The planner picks the noise scale sigma from the worst single call over
// all dataset sizes (the scan over m below), fixes the iteration budget
// k(n) = floor(k0 * n^{2 alpha} / ln n), and reports the closed-form
// epsilon/delta bounds for that budget alongside the per-call values, so a
// caller can also run the composition directly.

namespace penaltydp {

struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
};

struct PrivacyPlan {
  std::size_t n = 0;
  double alpha = 0.0, c = 0.0, beta = 0.0, k0 = 0.0;
  double sigma = 0.0;
  std::uint64_t k_n = 0;
  double eps_bound = 0.0, delta_bound = 0.0;
  double per_call_eps = 0.0, per_call_delta = 0.0;
};

struct ExpFamPlan {
  PrivacyPlan base;
  double suff_stat_l2_sensitivity = 0.0;
  double xi_n = 0.0;  // variance added to the sufficient statistic per call
};

// Safety factor applied wherever a strict ">" from the analysis has to
// become a concrete number.
inline constexpr double kStrictMargin = 1e-9;

// Smallest noise scale (up to the strictness margin) for one Gaussian
// mechanism release at the given sensitivity and (epsilon, delta) target.
// Valid for epsilon in (0, 1).
inline double gaussian_sigma(double l2_sensitivity, double epsilon, double delta) {
  if (!(l2_sensitivity > 0.0 && std::isfinite(l2_sensitivity))) {
    throw ConfigError("gaussian_sigma: sensitivity must be positive");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("gaussian_sigma: epsilon must lie in (0, 1)");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("gaussian_sigma: delta must lie in (0, 1)");
  }
  return (1.0 + kStrictMargin) * l2_sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) /
         epsilon;
}

// Inverse query: the epsilon this sigma buys at the given delta. Errors when
// the resulting epsilon leaves the analysis regime (>= 1).
inline PrivacyParams gaussian_mechanism_privacy(double sigma, double l2_sensitivity,
                                                double delta) {
  if (!(sigma > 0.0 && std::isfinite(sigma))) {
    throw ConfigError("gaussian_mechanism_privacy: sigma must be positive");
  }
  if (!(l2_sensitivity > 0.0 && std::isfinite(l2_sensitivity))) {
    throw ConfigError("gaussian_mechanism_privacy: sensitivity must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("gaussian_mechanism_privacy: delta must lie in (0, 1)");
  }
  const double eps = l2_sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / sigma;
  if (eps >= 1.0) {
    throw ConfigError("gaussian_mechanism_privacy: sigma too small, epsilon >= 1");
  }
  return {eps, delta};
}

// k-fold advanced composition at slack delta_prime, evaluated exactly:
//   eps' = sqrt(2 k ln(1/delta')) eps + k eps (e^eps - 1)
//   delta'_total = k delta + delta'
inline PrivacyParams advanced_composition(PrivacyParams per_step, std::uint64_t k,
                                          double delta_prime) {
  if (!(per_step.epsilon >= 0.0 && std::isfinite(per_step.epsilon))) {
    throw ConfigError("advanced_composition: epsilon must be finite and >= 0");
  }
  if (!(per_step.delta >= 0.0 && per_step.delta <= 1.0)) {
    throw ConfigError("advanced_composition: delta must lie in [0, 1]");
  }
  if (k < 1) throw ConfigError("advanced_composition: k must be >= 1");
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw ConfigError("advanced_composition: delta_prime must lie in (0, 1)");
  }
  const double kk = static_cast<double>(k);
  const double eps = std::sqrt(2.0 * kk * std::log(1.0 / delta_prime)) * per_step.epsilon +
                     kk * per_step.epsilon * std::expm1(per_step.epsilon);
  return {eps, kk * per_step.delta + delta_prime};
}

// Full budget plan for a dataset of size n with sensitivity decay c * n^-alpha.
inline PrivacyPlan make_plan(std::size_t n, double alpha, double c, double beta, double k0) {
  if (n < 2) throw ConfigError("make_plan: n must be >= 2");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("make_plan: alpha in (0, 1]");
  if (!(c > 0.0 && std::isfinite(c))) throw ConfigError("make_plan: c > 0");
  if (!(beta > 0.0 && std::isfinite(beta))) throw ConfigError("make_plan: beta > 0");
  if (!(k0 > 0.0 && std::isfinite(k0))) throw ConfigError("make_plan: k0 > 0");

  const double beta_prime = 2.0 * alpha + beta;

  // sigma must beat c * m^-alpha * sqrt(2 beta' ln m) for every dataset size
  // m >= 1. The scan stops once the objective has failed to improve for 10
  // consecutive sizes (it is eventually decreasing in m).
  double best = 0.0;
  int since_improvement = 0;
  for (std::uint64_t m = 1; since_improvement < 10; ++m) {
    if (m > 100000000ull) {
      throw ConfigError("make_plan: sigma scan did not settle (alpha too small)");
    }
    const double t = c * std::pow(static_cast<double>(m), -alpha) *
                     std::sqrt(2.0 * beta_prime * std::log(static_cast<double>(m)));
    if (t > best) {
      best = t;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
  }
  const double sigma = best * (1.0 + kStrictMargin);

  PrivacyPlan plan;
  plan.n = n;
  plan.alpha = alpha;
  plan.c = c;
  plan.beta = beta;
  plan.k0 = k0;
  plan.sigma = sigma;

  const double nn = static_cast<double>(n);
  const double kn = std::floor(k0 * std::pow(nn, 2.0 * alpha) / std::log(nn));
  if (!(kn >= 1.0)) throw ConfigError("make_plan: iteration budget rounds to zero");
  plan.k_n = static_cast<std::uint64_t>(kn);

  plan.eps_bound = 2.0 * std::sqrt(k0 * beta_prime * beta) * c / sigma +
                   4.0 * k0 * (c / sigma) * (c / sigma) * beta_prime;
  plan.delta_bound = 1.25 * k0 * std::pow(nn, -beta) / std::log(nn) + std::pow(nn, -beta);

  // Per-call privacy of one release at sensitivity c * n^-alpha. By the
  // construction of sigma this epsilon is strictly below 1.
  const double per_delta = 1.25 * std::pow(nn, -beta_prime);
  const PrivacyParams per =
      gaussian_mechanism_privacy(sigma, c * std::pow(nn, -alpha), per_delta);
  plan.per_call_eps = per.epsilon;
  plan.per_call_delta = per.delta;
  return plan;
}

// Exponential-family variant: the sufficient statistic is privatised with
// variance xi_n = sigma^2 * s^2 * n^{2 alpha} / c^2, which caps the induced
// noise on d_n at (s * sigma)^2 whenever the natural-parameter displacement
// respects the plan's c * n^-alpha budget.
inline ExpFamPlan make_expfam_plan(const PrivacyPlan& plan,
                                   double suff_stat_l2_sensitivity) {
  if (!(suff_stat_l2_sensitivity > 0.0 && std::isfinite(suff_stat_l2_sensitivity))) {
    throw ConfigError("make_expfam_plan: sufficient-statistic sensitivity must be > 0");
  }
  ExpFamPlan ep;
  ep.base = plan;
  ep.suff_stat_l2_sensitivity = suff_stat_l2_sensitivity;
  const double s = suff_stat_l2_sensitivity;
  ep.xi_n = plan.sigma * plan.sigma * s * s *
            std::pow(static_cast<double>(plan.n), 2.0 * plan.alpha) / (plan.c * plan.c);
  return ep;
}

// Exact delta of the Gaussian mechanism at a given epsilon (the tight
// trade-off curve, not the sufficient condition the planner uses):
//   delta = Phi(D/(2 sigma) - eps sigma/D) - e^eps Phi(-D/(2 sigma) - eps sigma/D)
inline double exact_gaussian_delta(double epsilon, double l2_sensitivity, double sigma) {
  if (!(epsilon >= 0.0 && std::isfinite(epsilon))) {
    throw ConfigError("exact_gaussian_delta: epsilon must be finite and >= 0");
  }
  if (!(l2_sensitivity > 0.0) || !(sigma > 0.0)) {
    throw ConfigError("exact_gaussian_delta: sensitivity and sigma must be positive");
  }
  const double a = l2_sensitivity / (2.0 * sigma);
  const double b = epsilon * sigma / l2_sensitivity;
  const double d = normal_cdf(a - b) - std::exp(epsilon + log_normal_cdf(-a - b));
  return d < 0.0 ? 0.0 : (d > 1.0 ? 1.0 : d);
}

}  // namespace penaltydp

#endif  // PENALTYDP_PRIVACY_HPP_
