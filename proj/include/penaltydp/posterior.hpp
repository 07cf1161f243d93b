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

#ifndef PENALTYDP_POSTERIOR_HPP_
#define PENALTYDP_POSTERIOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "penaltydp/model.hpp"

// Closed-form posteriors for the built-in conjugate models, truncated to the
// parameter box. Moments and the CDF come from adaptive numerical
// integration of the (unnormalised) density over the box, so they are exact
// for the *truncated* law that the samplers actually target.

namespace penaltydp {

namespace detail {

template <typename F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol = 1e-12) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace detail

// One-dimensional truncated posterior with quadrature-backed moments.
class AnalyticPosterior {
 public:
  AnalyticPosterior(std::string family, Vec params, double lo, double hi,
                    std::function<double(double)> log_density_unnorm)
      : family_(std::move(family)),
        params_(std::move(params)),
        lo_(lo),
        hi_(hi),
        logpdf_(std::move(log_density_unnorm)) {
    // Scale by the density peak on a scan grid so the quadrature works on
    // O(1) numbers even when the unnormalised density is tiny or huge.
    constexpr int kScan = 512;
    log_scale_ = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kScan; ++i) {
      const double x = lo_ + (hi_ - lo_) * static_cast<double>(i) / kScan;
      log_scale_ = std::max(log_scale_, logpdf_(x));
    }
    const auto w = [this](double x) { return std::exp(logpdf_(x) - log_scale_); };

    // Moments are accumulated cell by cell like the CDF table. A single
    // adaptive pass over the whole box can terminate on the flat tails and
    // miss a sharply peaked posterior entirely once n is large.
    cells_.resize(kCells + 1, 0.0);
    const double step = (hi_ - lo_) / kCells;
    double first = 0.0;
    for (int j = 0; j < kCells; ++j) {
      const double a = lo_ + j * step;
      cells_[j + 1] = cells_[j] + detail::integrate(w, a, a + step, 1e-13);
      first += detail::integrate([&](double x) { return x * w(x); }, a, a + step, 1e-13);
    }
    z_ = cells_[kCells];
    mean_ = first / z_;

    double second = 0.0;
    for (int j = 0; j < kCells; ++j) {
      const double a = lo_ + j * step;
      second += detail::integrate(
          [&](double x) {
            const double c = x - mean_;
            return c * c * w(x);
          },
          a, a + step, 1e-13);
    }
    variance_ = second / z_;
  }

  const std::string& family() const { return family_; }
  const Vec& params() const { return params_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }

  double pdf(double x) const {
    if (x < lo_ || x > hi_) return 0.0;
    return std::exp(logpdf_(x) - log_scale_) / z_;
  }

  double cdf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const double step = (hi_ - lo_) / kCells;
    auto j = static_cast<std::size_t>((x - lo_) / step);
    if (j >= kCells) j = kCells - 1;
    const double a = lo_ + j * step;
    const auto w = [this](double t) { return std::exp(logpdf_(t) - log_scale_); };
    const double c = (cells_[j] + detail::integrate(w, a, x, 1e-13)) / z_;
    return c < 0.0 ? 0.0 : (c > 1.0 ? 1.0 : c);
  }

 private:
  static constexpr int kCells = 2048;
  std::string family_;
  Vec params_;
  double lo_, hi_;
  std::function<double(double)> logpdf_;
  double log_scale_ = 0.0;
  double z_ = 1.0;
  double mean_ = 0.0;
  double variance_ = 0.0;
  std::vector<double> cells_;
};

// Conjugate posterior for the built-in models. Beta-Bernoulli data with a
// Beta(a, b) prior gives Beta(a + s, b + n - s); the unit-variance Gaussian
// mean with a N(m0, s0^2) prior gives the usual precision-weighted normal.
// Both are then truncated to the parameter box.
inline AnalyticPosterior analytic_posterior(const TargetModel& model, const Dataset& data) {
  if (data.size() == 0) throw DataError("analytic_posterior: empty dataset");
  const double lo = model.param_box.lower[0];
  const double hi = model.param_box.upper[0];
  if (model.name == "beta_bernoulli") {
    const double a = model.prior_params.at(0);
    const double b = model.prior_params.at(1);
    double s = 0.0;
    for (const Vec& y : data.records) s += y[0];
    const double ap = a + s;
    const double bp = b + static_cast<double>(data.size()) - s;
    return AnalyticPosterior(
        "beta", {ap, bp}, lo, hi,
        [ap, bp](double x) { return (ap - 1.0) * std::log(x) + (bp - 1.0) * std::log1p(-x); });
  }
  if (model.name == "gaussian_mean") {
    const double m0 = model.prior_params.at(0);
    const double s0 = model.prior_params.at(1);
    double sum = 0.0;
    for (const Vec& y : data.records) sum += y[0];
    const double prec = 1.0 / (s0 * s0) + static_cast<double>(data.size());
    const double mu = (m0 / (s0 * s0) + sum) / prec;
    const double var = 1.0 / prec;
    return AnalyticPosterior("normal", {mu, var}, lo, hi, [mu, var](double x) {
      const double z = x - mu;
      return -0.5 * z * z / var;
    });
  }
  throw std::invalid_argument("analytic_posterior: no closed form for model '" +
                              model.name + "'");
}

}  // namespace penaltydp

#endif  // PENALTYDP_POSTERIOR_HPP_
