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

#ifndef PENALTYDP_ACCEPT_MATH_HPP_
#define PENALTYDP_ACCEPT_MATH_HPP_

#include <cmath>
#include <stdexcept>
#include <string>

// Acceptance probabilities for Metropolis-Hastings and its penalty variant.
//
// The penalty method replaces the log target ratio lambda with a Gaussian
// perturbation lambda_hat ~ N(lambda, sigma^2) and accepts with
// min{1, exp(lambda_hat - sigma^2/2)}. The sigma^2/2 correction makes the
// *expected* acceptance indicator integrate out the noise exactly, so the
// chain keeps the intended stationary law. The marginal acceptance given
// lambda has the closed form
//
//   alpha_sigma(lambda) = Phi(lambda/sigma - sigma/2)
//                       + e^lambda * Phi(-lambda/sigma - sigma/2)
//
// which this header evaluates in log space so it stays finite for any
// representable lambda.

namespace penaltydp {

// Finite log ratio of target densities (target(theta') / target(theta)).
struct LogRatio {
  explicit LogRatio(double v) : value(v) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("LogRatio must be finite, got " + std::to_string(v));
    }
  }
  double value;
};

// Standard deviation of the additive noise on the log ratio.
struct NoiseLevel {
  explicit NoiseLevel(double v) : value(v) {
    if (!(std::isfinite(v) && v >= 0.0)) {
      throw std::invalid_argument("NoiseLevel must be finite and >= 0, got " +
                                  std::to_string(v));
    }
  }
  double value;
};

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

// log Phi(x), finite for every finite x. Below x = -20 the direct erfc
// evaluation is replaced with the Laplace continued fraction for the Mills
// ratio, Phi(-t) = pdf(t) / (t + 1/(t + 2/(t + 3/(...)))), which stays
// accurate long after erfc itself underflows (x < -37.5).
inline double log_normal_cdf(double x) {
  if (x >= -20.0) {
    return std::log(normal_cdf(x));
  }
  const double t = -x;
  double tail = 0.0;
  for (int k = 100; k >= 1; --k) {
    tail = static_cast<double>(k) / (t + tail);
  }
  return -0.5 * t * t - kLogSqrt2Pi - std::log(t + tail);
}

// Plain Metropolis-Hastings acceptance, min{1, e^lambda}.
inline double mh_acceptance(LogRatio lr) {
  return lr.value >= 0.0 ? 1.0 : std::exp(lr.value);
}

// Acceptance applied once the noisy ratio lambda_hat has been realized:
// min{1, exp(lambda_hat - sigma^2/2)}.
inline double penalty_acceptance_realized(LogRatio lambda_hat, NoiseLevel sigma) {
  const double e = lambda_hat.value - 0.5 * sigma.value * sigma.value;
  return e >= 0.0 ? 1.0 : std::exp(e);
}

// Noise-averaged acceptance alpha_sigma(lambda). At sigma = 0 this is the
// plain MH rule. The e^lambda * Phi(...) term is assembled as
// exp(lambda + log Phi(...)) to dodge overflow at large |lambda|.
inline double expected_penalty_acceptance(LogRatio lr, NoiseLevel sigma) {
  if (sigma.value == 0.0) {
    return mh_acceptance(lr);
  }
  const double a = lr.value / sigma.value - 0.5 * sigma.value;
  const double b = lr.value / sigma.value + 0.5 * sigma.value;
  const double term1 = normal_cdf(a);
  const double term2 = std::exp(lr.value + log_normal_cdf(-b));
  const double alpha = term1 + term2;
  return alpha < 1.0 ? alpha : 1.0;
}

// d alpha_sigma(lambda) / d sigma = -pdf(sigma/2 - lambda/sigma). Strictly
// negative, so the expected acceptance decays as the noise grows.
inline double expected_penalty_acceptance_dsigma(LogRatio lr, NoiseLevel sigma) {
  if (sigma.value <= 0.0) {
    throw std::invalid_argument("derivative requires sigma > 0");
  }
  return -normal_pdf(0.5 * sigma.value - lr.value / sigma.value);
}

// Uniform minorisation constant: whenever sigma^2(theta, theta') <= B the
// penalty acceptance is at least kappa = 1 - Phi(B/2) times the MH one.
inline double kappa_lower_bound(double B) {
  if (!(std::isfinite(B) && B >= 0.0)) {
    throw std::invalid_argument("kappa_lower_bound requires finite B >= 0");
  }
  return normal_cdf(-0.5 * B);
}

}  // namespace penaltydp

#endif  // PENALTYDP_ACCEPT_MATH_HPP_
