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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <penaltydp/model.hpp>
#include <penaltydp/posterior.hpp>

#include "helpers.hpp"

using penaltydp::BoundsPolicy;
using penaltydp::ConfigError;
using penaltydp::DataError;
using penaltydp::Dataset;
using penaltydp::DataSpace;
using penaltydp::ParamBox;
using penaltydp::TargetModel;
using penaltydp::Vec;

TEST_CASE("param box validates bounds and clamps") {
  CHECK_THROWS_AS(ParamBox({0.0, 1.0}, {1.0}), ConfigError);
  CHECK_THROWS_AS(ParamBox({1.0}, {0.0}), ConfigError);
  CHECK_THROWS_AS(ParamBox({0.0}, {std::numeric_limits<double>::infinity()}),
                  ConfigError);

  const ParamBox box({0.0, -1.0}, {1.0, 1.0});
  CHECK(box.dim() == 2);
  CHECK(box.contains({0.5, 0.0}));
  CHECK(box.contains({0.0, 1.0}));
  CHECK_FALSE(box.contains({1.5, 0.0}));
  CHECK_FALSE(box.contains({0.5}));
  CHECK(box.clamp({2.0, -3.0}) == Vec{1.0, -1.0});
  CHECK(box.clamp({0.25, 0.5}) == Vec{0.25, 0.5});
  CHECK(box.center() == Vec{0.5, 0.0});
}

TEST_CASE("data space clips records to its bounds") {
  const DataSpace space({-1.0}, {1.0});
  CHECK(space.record_dim() == 1);
  CHECK(space.contains({0.3}));
  CHECK_FALSE(space.contains({1.2}));
  CHECK(space.clip({1.2}) == Vec{1.0});
  CHECK(space.clip({-9.0}) == Vec{-1.0});
}

TEST_CASE("ingest rejects or clips out-of-bounds records by policy") {
  const DataSpace space({0.0}, {1.0});
  CHECK_THROWS_AS(penaltydp::ingest({}, space, BoundsPolicy::kReject), DataError);
  CHECK_THROWS_AS(penaltydp::ingest({{0.5, 0.5}}, space, BoundsPolicy::kReject),
                  DataError);
  CHECK_THROWS_AS(penaltydp::ingest({{0.5}, {2.0}}, space, BoundsPolicy::kReject),
                  DataError);

  const Dataset clipped =
      penaltydp::ingest({{0.5}, {2.0}, {-1.0}}, space, BoundsPolicy::kClip);
  REQUIRE(clipped.size() == 3);
  CHECK(clipped.records[1] == Vec{1.0});
  CHECK(clipped.records[2] == Vec{0.0});
}

TEST_CASE("csv loader parses scalar and vector records") {
  testutil::TempDir dir("csv");

  const std::string p1 = dir.file("ok.csv");
  testutil::write_file(p1, "y\n0\n1\n0.5\n\n1\n");
  const Dataset d1 =
      penaltydp::load_dataset_csv(p1, DataSpace({0.0}, {1.0}), BoundsPolicy::kReject);
  REQUIRE(d1.size() == 4);
  CHECK(d1.records[2] == Vec{0.5});

  const std::string p2 = dir.file("vec.csv");
  testutil::write_file(p2, "y1,y2\r\n0.1,0.2\r\n0.3,0.4\r\n");
  const Dataset d2 = penaltydp::load_dataset_csv(p2, DataSpace({0.0, 0.0}, {1.0, 1.0}),
                                                 BoundsPolicy::kReject);
  REQUIRE(d2.size() == 2);
  CHECK(d2.records[1] == Vec{0.3, 0.4});
}

TEST_CASE("csv loader reports file, line and cause on bad input") {
  testutil::TempDir dir("csvbad");
  const DataSpace space({0.0}, {1.0});

  CHECK_THROWS_AS(
      penaltydp::load_dataset_csv(dir.file("missing.csv"), space, BoundsPolicy::kReject),
      DataError);

  const std::string bad_header = dir.file("h.csv");
  testutil::write_file(bad_header, "value\n0.5\n");
  CHECK_THROWS_WITH(
      penaltydp::load_dataset_csv(bad_header, space, BoundsPolicy::kReject),
      Catch::Matchers::ContainsSubstring("header"));

  const std::string bad_number = dir.file("n.csv");
  testutil::write_file(bad_number, "y\n0.5\nabc\n");
  CHECK_THROWS_WITH(
      penaltydp::load_dataset_csv(bad_number, space, BoundsPolicy::kReject),
      Catch::Matchers::ContainsSubstring(":3:"));

  const std::string oob = dir.file("o.csv");
  testutil::write_file(oob, "y\n0.5\n7\n");
  CHECK_THROWS_AS(penaltydp::load_dataset_csv(oob, space, BoundsPolicy::kReject),
                  DataError);
  const Dataset clipped = penaltydp::load_dataset_csv(oob, space, BoundsPolicy::kClip);
  CHECK(clipped.records[1] == Vec{1.0});
}

TEST_CASE("bernoulli log likelihood difference matches the frozen value") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.05, 0.95);
  // Three records {1, 1, 0}; theta 0.5 -> 0.25:
  // 2 ln(0.25/0.5) + ln(0.75/0.5).
  const Dataset data = testutil::bernoulli_data(3, 2);
  CHECK(penaltydp::log_lik_diff(m, data, {0.5}, {0.25}) ==
        Catch::Approx(-0.98082925301172624).margin(1e-14));
  CHECK(penaltydp::log_lik_diff(m, data, {0.5}, {0.5}) == 0.0);
  CHECK_THROWS_AS(penaltydp::log_lik_diff(m, data, {0.5}, {0.99}),
                  std::invalid_argument);
}

TEST_CASE("gaussian log likelihood difference has the conjugate form") {
  const TargetModel m = penaltydp::make_gaussian_mean(0.0, 1.0);
  const Dataset data = testutil::cosine_data(50, 0.2, 0.3);
  double sum_y = 0.0;
  for (const auto& r : data.records) sum_y += r[0];
  const double t0 = 0.1, t1 = 0.3;
  const double expect =
      (t1 - t0) * sum_y - 0.5 * 50.0 * (t1 * t1 - t0 * t0);
  CHECK(penaltydp::log_lik_diff(m, data, {t0}, {t1}) ==
        Catch::Approx(expect).margin(1e-10));
}

TEST_CASE("sufficient statistic sums match direct counts") {
  const TargetModel bb = penaltydp::make_beta_bernoulli(2.0, 3.0, 0.1, 0.9);
  CHECK(penaltydp::suff_stat_sum(bb, testutil::bernoulli_data(10, 7)) == Vec{7.0});

  const TargetModel gm = penaltydp::make_gaussian_mean(0.0, 1.0);
  const Dataset data = testutil::cosine_data(20, 0.1, 0.2);
  double sum_y = 0.0;
  for (const auto& r : data.records) sum_y += r[0];
  const Vec s = penaltydp::suff_stat_sum(gm, data);
  REQUIRE(s.size() == 1);
  CHECK(s[0] == Catch::Approx(sum_y).margin(1e-12));

  TargetModel plain = bb;
  plain.expfam.reset();
  CHECK_THROWS_AS(penaltydp::suff_stat_sum(plain, data), std::invalid_argument);
}

TEST_CASE("sensitivity bound is 2 d w M and validates the window") {
  const TargetModel m = penaltydp::make_gaussian_mean(0.0, 1.0);
  CHECK(m.lipschitz_M == 2.0);
  CHECK(penaltydp::sensitivity_bound(m, 0.1) == Catch::Approx(0.4).margin(1e-15));
  CHECK(penaltydp::sensitivity_bound(m, 0.0) == 0.0);
  CHECK_THROWS_AS(penaltydp::sensitivity_bound(m, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(penaltydp::sensitivity_bound(m, std::nan("")), std::invalid_argument);
}

TEST_CASE("brute force sensitivity matches the frozen gaussian value") {
  // theta 0 -> 0.1: f(y) = 0.1 y - 0.005, so max f - min f = 0.2 over [-1, 1].
  const TargetModel m = penaltydp::make_gaussian_mean(0.0, 1.0);
  const double bf = penaltydp::sensitivity_bruteforce(m, {0.0}, {0.1}, 2001);
  CHECK(bf == Catch::Approx(0.2).margin(1e-12));
  // The closed-form bound with w = 0.1 dominates it.
  CHECK(bf <= penaltydp::sensitivity_bound(m, 0.1) + 1e-12);
}

TEST_CASE("brute force sensitivity is dominated by the bound on a grid") {
  const TargetModel bb = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.2, 0.8);
  for (double t = 0.25; t <= 0.7 + 1e-9; t += 0.05) {
    for (double w : {0.01, 0.05, 0.1}) {
      const double bf = penaltydp::sensitivity_bruteforce(bb, {t}, {t + w}, 501);
      CHECK(bf <= penaltydp::sensitivity_bound(bb, w) + 1e-12);
    }
  }
  CHECK_THROWS_AS(penaltydp::sensitivity_bruteforce(bb, {0.5}, {0.6}, 1),
                  std::invalid_argument);
}

TEST_CASE("beta bernoulli factory wires the prior, box and expfam pieces") {
  CHECK_THROWS_AS(penaltydp::make_beta_bernoulli(0.0, 1.0, 0.1, 0.9), ConfigError);
  CHECK_THROWS_AS(penaltydp::make_beta_bernoulli(1.0, 1.0, 0.9, 0.1), ConfigError);
  CHECK_THROWS_AS(penaltydp::make_beta_bernoulli(1.0, 1.0, 0.0, 0.9), ConfigError);

  const TargetModel m = penaltydp::make_beta_bernoulli(2.0, 3.0, 0.1, 0.8);
  CHECK(m.name == "beta_bernoulli");
  CHECK(m.lipschitz_M == Catch::Approx(10.0).margin(1e-12));
  CHECK(m.log_prior({0.5}) ==
        Catch::Approx(std::log(0.5) + 2.0 * std::log(0.5)).margin(1e-12));
  CHECK(m.log_prior({0.95}) == -std::numeric_limits<double>::infinity());

  // log lik factorises as log g + phi * S with h = 1.
  REQUIRE(m.expfam.has_value());
  for (double y : {0.0, 1.0}) {
    for (double t = 0.1; t <= 0.8 + 1e-9; t += 0.1) {
      const double direct = m.log_lik_record({y}, {t});
      const double fact = m.expfam->log_g({t}) +
                          m.expfam->natural_param({t})[0] * m.expfam->suff_stat({y})[0];
      CHECK(std::abs(direct - fact) < 1e-12);
    }
  }
  CHECK(m.expfam->suff_stat_l2_sensitivity == 1.0);
}

TEST_CASE("gaussian mean factory wires the prior, box and expfam pieces") {
  CHECK_THROWS_AS(penaltydp::make_gaussian_mean(0.0, 0.0), ConfigError);

  const TargetModel m = penaltydp::make_gaussian_mean(0.5, 2.0);
  CHECK(m.name == "gaussian_mean");
  CHECK(m.lipschitz_M == 2.0);
  CHECK(m.log_prior({0.5}) == 0.0);
  CHECK(m.log_prior({1.5}) == -std::numeric_limits<double>::infinity());

  // log lik - (log g + phi * S) must equal log h(y) = -y^2/2, free of theta.
  REQUIRE(m.expfam.has_value());
  for (double y : {-1.0, -0.3, 0.4, 1.0}) {
    for (double t : {-0.8, 0.0, 0.6}) {
      const double rem = m.log_lik_record({y}, {t}) -
                         (m.expfam->log_g({t}) +
                          m.expfam->natural_param({t})[0] * m.expfam->suff_stat({y})[0]);
      CHECK(rem == Catch::Approx(-0.5 * y * y).margin(1e-12));
    }
  }
  CHECK(m.expfam->suff_stat_l2_sensitivity == 2.0);
  CHECK(m.expfam->natural_param_lipschitz == 1.0);
}

TEST_CASE("natural parameter lipschitz constant bounds observed moves") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.1, 0.9);
  const double L = m.expfam->natural_param_lipschitz;
  CHECK(L == Catch::Approx(1.0 / (0.1 * 0.9)).margin(1e-12));
  for (double t = 0.1; t <= 0.85 + 1e-9; t += 0.025) {
    const double w = 0.05;
    const double moved = std::abs(m.expfam->natural_param({t + w})[0] -
                                  m.expfam->natural_param({t})[0]);
    CHECK(moved <= L * w + 1e-12);
  }
}

TEST_CASE("analytic posterior of truncated beta matches frozen moments") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.2, 0.8);
  // 3 records, 2 ones: posterior Beta(3, 2) truncated to [0.2, 0.8].
  const auto post = penaltydp::analytic_posterior(m, testutil::bernoulli_data(3, 2));
  CHECK(post.family() == "beta");
  CHECK(post.params() == Vec{3.0, 2.0});
  CHECK(post.mean() == Catch::Approx(0.55345454545454545).margin(1e-9));
  CHECK(post.variance() == Catch::Approx(0.023869884297520661).margin(1e-9));
  CHECK(post.cdf(0.2) == 0.0);
  CHECK(post.cdf(0.8) == 1.0);
  CHECK(post.cdf(post.mean()) > 0.4);
  CHECK(post.cdf(post.mean()) < 0.6);
}

TEST_CASE("analytic posterior of the gaussian mean is precision weighted") {
  const TargetModel m = penaltydp::make_gaussian_mean(0.0, 1.0);
  const Dataset one{{{0.5}}};
  const auto post = penaltydp::analytic_posterior(m, one);
  CHECK(post.family() == "normal");
  REQUIRE(post.params().size() == 2);
  CHECK(post.params()[0] == Catch::Approx(0.25).margin(1e-15));
  CHECK(post.params()[1] == Catch::Approx(0.5).margin(1e-15));
  // Moments integrate the truncated density; compare against the closed-form
  // truncated normal moments for N(0.25, 0.5) on [-1, 1].
  const double mu = 0.25, sd = std::sqrt(0.5);
  const double a = (-1.0 - mu) / sd, b = (1.0 - mu) / sd;
  const auto pdf = [](double x) {
    return 0.3989422804014326779 * std::exp(-0.5 * x * x);
  };
  const double z = testutil::simpson_normal_cdf(b) - testutil::simpson_normal_cdf(a);
  const double shift = (pdf(a) - pdf(b)) / z;
  const double tmean = mu + sd * shift;
  const double tvar = sd * sd * (1.0 + (a * pdf(a) - b * pdf(b)) / z - shift * shift);
  CHECK(post.mean() == Catch::Approx(tmean).margin(1e-9));
  CHECK(post.variance() == Catch::Approx(tvar).margin(1e-9));
}

TEST_CASE("analytic posterior cdf is monotone and normalised") {
  const TargetModel m = penaltydp::make_beta_bernoulli(2.0, 2.0, 0.1, 0.9);
  const auto post = penaltydp::analytic_posterior(m, testutil::bernoulli_data(20, 8));
  double prev = -1.0;
  for (double x = 0.1; x <= 0.9 + 1e-9; x += 0.02) {
    const double c = post.cdf(x);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(prev == Catch::Approx(1.0).margin(1e-9));
}
