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

#ifndef PENALTYDP_MODEL_HPP_
#define PENALTYDP_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "penaltydp/errors.hpp"

// Target models over a compact parameter box, with bounded data spaces and a
// Lipschitz constant on the per-record log likelihood. Those three pieces are
// what make the noisy log-likelihood difference releasable under a Gaussian
// mechanism: the worst-case change of d_n over neighbouring datasets is
// bounded by 2 * dim(theta) * w * M for proposals that move at most w per
// coordinate.

namespace penaltydp {

using Vec = std::vector<double>;

namespace detail {
inline void check_bounds_pair(const Vec& lo, const Vec& hi, const char* what) {
  if (lo.empty() || lo.size() != hi.size()) {
    throw ConfigError(std::string(what) + ": bounds must be nonempty and equal length");
  }
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(std::isfinite(lo[i]) && std::isfinite(hi[i]) && lo[i] < hi[i])) {
      throw ConfigError(std::string(what) + ": need finite lower < upper per coordinate");
    }
  }
}
}  // namespace detail

// Compact axis-aligned parameter domain.
struct ParamBox {
  Vec lower, upper;

  ParamBox(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    detail::check_bounds_pair(lower, upper, "ParamBox");
  }

  std::size_t dim() const { return lower.size(); }

  bool contains(const Vec& theta) const {
    if (theta.size() != lower.size()) return false;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (!(theta[i] >= lower[i] && theta[i] <= upper[i])) return false;
    }
    return true;
  }

  Vec clamp(Vec theta) const {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] = std::min(std::max(theta[i], lower[i]), upper[i]);
    }
    return theta;
  }

  Vec center() const {
    Vec c(lower.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
  }
};

// Per-coordinate record bounds; scalar records use a single coordinate.
struct DataSpace {
  Vec lower, upper;

  DataSpace(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    detail::check_bounds_pair(lower, upper, "DataSpace");
  }

  std::size_t record_dim() const { return lower.size(); }

  bool contains(const Vec& y) const {
    if (y.size() != lower.size()) return false;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(y[i] >= lower[i] && y[i] <= upper[i])) return false;
    }
    return true;
  }

  Vec clip(Vec y) const {
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = std::min(std::max(y[i], lower[i]), upper[i]);
    }
    return y;
  }
};

// Optional exponential-family factorisation of the likelihood,
//   p(y | theta) = h(y) g(theta) exp(phi(theta) . S(y)),
// which lets a sampler privatise the sufficient statistic once per sweep
// instead of the full log-likelihood difference.
struct ExpFamStructure {
  std::size_t dim = 1;  // length of S(y) and phi(theta)
  std::function<Vec(const Vec&)> suff_stat;
  std::function<Vec(const Vec&)> natural_param;
  std::function<double(const Vec&)> log_g;
  // sup over record pairs of ||S(x) - S(y)||_2
  double suff_stat_l2_sensitivity = 0.0;
  // sup over the box of ||phi(theta') - phi(theta)||_2 per unit l-inf move
  double natural_param_lipschitz = 0.0;
};

struct TargetModel {
  std::string name;
  ParamBox param_box;
  DataSpace data_space;
  std::function<double(const Vec&)> log_prior;  // unnormalised, -inf off the box
  std::function<double(const Vec&, const Vec&)> log_lik_record;  // (record, theta)
  double lipschitz_M = 0.0;  // bound on |d log_lik / d theta_i| over space x box
  std::optional<ExpFamStructure> expfam;
  Vec prior_params;  // hyperparameters, kept for conjugate posterior reports
};

struct Dataset {
  std::vector<Vec> records;

  std::size_t size() const { return records.size(); }
  std::size_t record_dim() const { return records.empty() ? 0 : records[0].size(); }
};

enum class BoundsPolicy { kReject, kClip };

// Validates records against the data space at ingestion time, so the hot
// sampling path can trust every record it touches.
inline Dataset ingest(std::vector<Vec> rows, const DataSpace& space, BoundsPolicy policy) {
  if (rows.empty()) throw DataError("dataset must contain at least one record");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != space.record_dim()) {
      throw DataError("record " + std::to_string(i) + " has dimension " +
                      std::to_string(rows[i].size()) + ", expected " +
                      std::to_string(space.record_dim()));
    }
    if (!space.contains(rows[i])) {
      if (policy == BoundsPolicy::kReject) {
        throw DataError("record " + std::to_string(i) + " lies outside the data bounds");
      }
      rows[i] = space.clip(std::move(rows[i]));
    }
  }
  return Dataset{std::move(rows)};
}

// CSV with header "y" for scalar records or "y1,...,yk" for vector records.
inline Dataset load_dataset_csv(const std::string& path, const DataSpace& space,
                                BoundsPolicy policy) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const std::size_t k = space.record_dim();
  bool ok = false;
  if (k == 1) {
    ok = header.size() == 1 && (header[0] == "y" || header[0] == "y1");
  } else {
    ok = header.size() == k;
    for (std::size_t i = 0; ok && i < k; ++i) {
      ok = header[i] == "y" + std::to_string(i + 1);
    }
  }
  if (!ok) throw DataError(path + ": expected header 'y' or 'y1,...,y" +
                           std::to_string(k) + "', got '" + line + "'");

  std::vector<Vec> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Vec row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      if (used != cell.size() || !std::isfinite(v)) {
        throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return ingest(std::move(rows), space, policy);
}

// d_n = sum_i [ log_lik(y_i, theta') - log_lik(y_i, theta) ].
inline double log_lik_diff(const TargetModel& model, const Dataset& data, const Vec& theta,
                           const Vec& theta_prime) {
  if (!model.param_box.contains(theta) || !model.param_box.contains(theta_prime)) {
    throw std::invalid_argument("log_lik_diff: parameters must lie in the ParamBox");
  }
  double s = 0.0;
  for (const Vec& y : data.records) {
    s += model.log_lik_record(y, theta_prime) - model.log_lik_record(y, theta);
  }
  return s;
}

inline Vec suff_stat_sum(const TargetModel& model, const Dataset& data) {
  if (!model.expfam) {
    throw std::invalid_argument("suff_stat_sum: model has no exponential-family structure");
  }
  Vec s(model.expfam->dim, 0.0);
  for (const Vec& y : data.records) {
    const Vec sy = model.expfam->suff_stat(y);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] += sy[j];
  }
  return s;
}

// Worst-case change of d_n when one record is replaced, for proposals that
// move each coordinate by at most w: 2 * dim(theta) * w * M.
inline double sensitivity_bound(const TargetModel& model, double w) {
  if (!(std::isfinite(w) && w >= 0.0)) {
    throw std::invalid_argument("sensitivity_bound: window must be finite and >= 0");
  }
  return 2.0 * static_cast<double>(model.param_box.dim()) * w * model.lipschitz_M;
}

// Grid oracle for the same quantity: max over record pairs (x, y) of
// |[l(x,theta') - l(x,theta)] - [l(y,theta') - l(y,theta)]|, which equals
// max f - min f for f(y) = l(y,theta') - l(y,theta).
inline double sensitivity_bruteforce(const TargetModel& model, const Vec& theta,
                                     const Vec& theta_prime, std::size_t grid_points) {
  if (grid_points < 2) {
    throw std::invalid_argument("sensitivity_bruteforce: need at least 2 grid points");
  }
  const std::size_t d = model.data_space.record_dim();
  double total = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    total *= static_cast<double>(grid_points);
    if (total > 4e6) {
      throw std::invalid_argument("sensitivity_bruteforce: grid too large for record dim");
    }
  }
  double fmax = -std::numeric_limits<double>::infinity();
  double fmin = std::numeric_limits<double>::infinity();
  Vec y(d, 0.0);
  std::vector<std::size_t> idx(d, 0);
  const auto cell = [&](std::size_t i, std::size_t j) {
    return model.data_space.lower[i] +
           (model.data_space.upper[i] - model.data_space.lower[i]) *
               static_cast<double>(j) / static_cast<double>(grid_points - 1);
  };
  for (;;) {
    for (std::size_t i = 0; i < d; ++i) y[i] = cell(i, idx[i]);
    const double f =
        model.log_lik_record(y, theta_prime) - model.log_lik_record(y, theta);
    fmax = std::max(fmax, f);
    fmin = std::min(fmin, f);
    std::size_t i = 0;
    while (i < d && ++idx[i] == grid_points) idx[i++] = 0;
    if (i == d) break;
  }
  return fmax - fmin;
}

// Bernoulli likelihood with a Beta(a, b) prior truncated to
// [theta_min, theta_max] inside (0, 1).
inline TargetModel make_beta_bernoulli(double a, double b, double theta_min,
                                       double theta_max) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("beta_bernoulli: need a > 0 and b > 0");
  if (!(0.0 < theta_min && theta_min < theta_max && theta_max < 1.0)) {
    throw ConfigError("beta_bernoulli: need 0 < theta_min < theta_max < 1");
  }
  TargetModel m{
      "beta_bernoulli",
      ParamBox({theta_min}, {theta_max}),
      DataSpace({0.0}, {1.0}),
      nullptr,
      nullptr,
      std::max(1.0 / theta_min, 1.0 / (1.0 - theta_max)),
      std::nullopt,
      {a, b},
  };
  ParamBox box = m.param_box;
  m.log_prior = [a, b, box](const Vec& t) {
    if (!box.contains(t)) return -std::numeric_limits<double>::infinity();
    return (a - 1.0) * std::log(t[0]) + (b - 1.0) * std::log1p(-t[0]);
  };
  m.log_lik_record = [](const Vec& y, const Vec& t) {
    return y[0] * std::log(t[0]) + (1.0 - y[0]) * std::log1p(-t[0]);
  };
  ExpFamStructure ef;
  ef.dim = 1;
  ef.suff_stat = [](const Vec& y) { return Vec{y[0]}; };
  ef.natural_param = [](const Vec& t) { return Vec{std::log(t[0]) - std::log1p(-t[0])}; };
  ef.log_g = [](const Vec& t) { return std::log1p(-t[0]); };
  ef.suff_stat_l2_sensitivity = 1.0;
  ef.natural_param_lipschitz = std::max(1.0 / (theta_min * (1.0 - theta_min)),
                                        1.0 / (theta_max * (1.0 - theta_max)));
  m.expfam = std::move(ef);
  return m;
}

// Unit-variance Gaussian likelihood over a clipped observation range with a
// normal prior truncated to the box.
inline TargetModel make_gaussian_mean(double prior_mean, double prior_sd,
                                      double y_min = -1.0, double y_max = 1.0,
                                      double theta_min = -1.0, double theta_max = 1.0) {
  if (!(prior_sd > 0.0)) throw ConfigError("gaussian_mean: need prior_sd > 0");
  TargetModel m{
      "gaussian_mean",
      ParamBox({theta_min}, {theta_max}),
      DataSpace({y_min}, {y_max}),
      nullptr,
      nullptr,
      std::max(theta_max - y_min, y_max - theta_min),
      std::nullopt,
      {prior_mean, prior_sd},
  };
  ParamBox box = m.param_box;
  m.log_prior = [prior_mean, prior_sd, box](const Vec& t) {
    if (!box.contains(t)) return -std::numeric_limits<double>::infinity();
    const double z = (t[0] - prior_mean) / prior_sd;
    return -0.5 * z * z;
  };
  m.log_lik_record = [](const Vec& y, const Vec& t) {
    const double r = y[0] - t[0];
    return -0.5 * r * r;
  };
  ExpFamStructure ef;
  ef.dim = 1;
  ef.suff_stat = [](const Vec& y) { return Vec{y[0]}; };
  ef.natural_param = [](const Vec& t) { return Vec{t[0]}; };
  ef.log_g = [](const Vec& t) { return -0.5 * t[0] * t[0]; };
  ef.suff_stat_l2_sensitivity = y_max - y_min;
  ef.natural_param_lipschitz = 1.0;
  m.expfam = std::move(ef);
  return m;
}

}  // namespace penaltydp

#endif  // PENALTYDP_MODEL_HPP_
