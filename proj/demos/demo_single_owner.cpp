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

// Single-owner walkthrough: draw a Gaussian dataset, let the privacy planner
// pick the noise level and iteration budget, run the sufficient-statistic
// penalty chain, and compare the result against the truncated conjugate
// posterior.

#include <algorithm>
#include <cstdio>

#include "penaltydp/experiment.hpp"
#include "penaltydp/model.hpp"
#include "penaltydp/posterior.hpp"
#include "penaltydp/privacy.hpp"
#include "penaltydp/rng.hpp"
#include "penaltydp/sampler.hpp"

int main() {
  using namespace penaltydp;

  const TargetModel model = make_gaussian_mean(0.0, 1.0);

  // n = 10000 observations around a true mean of 0.25, clipped to the
  // model's observation range [-1, 1].
  RngStream data_rng(7, 99);
  std::vector<Vec> rows;
  for (int i = 0; i < 10000; ++i) {
    rows.push_back({std::clamp(0.25 + 0.5 * data_rng.normal(), -1.0, 1.0)});
  }
  const Dataset data = ingest(rows, model.data_space, BoundsPolicy::kReject);

  // Plan: alpha = 0.5, beta = 1.1, k0 = 8, proposal scale c_prop = 0.5.
  // k0 buys chain length at the price of a larger epsilon bound.
  const double c_prop = 0.5, alpha = 0.5, beta = 1.1, k0 = 8.0;
  const double c = sensitivity_scale(model, SamplerMode::kExpfam, c_prop);
  const PrivacyPlan plan = make_plan(data.size(), alpha, c, beta, k0);
  const ExpFamPlan ef = make_expfam_plan(plan, model.expfam->suff_stat_l2_sensitivity);
  std::printf("plan: sigma=%.4f k_n=%llu eps_bound=%.4f delta_bound=%.3e xi_n=%.1f\n",
              plan.sigma, static_cast<unsigned long long>(plan.k_n), plan.eps_bound,
              plan.delta_bound, ef.xi_n);

  const ProposalKernel kernel{c_prop * std::pow(static_cast<double>(data.size()), -alpha)};
  const PenaltyConfig cfg{0.0, plan.k_n, plan.k_n / 10, 1};
  const RunResult run =
      run_chain(model, data, kernel, cfg, SamplerMode::kExpfam, /*seed=*/42, ef.xi_n);

  const AnalyticPosterior post = analytic_posterior(model, data);
  std::printf("chain: accept=%.3f retained=%llu mean=%.5f (analytic %.5f)\n",
              run.summary.acceptance_rate,
              static_cast<unsigned long long>(run.summary.retained),
              run.summary.posterior_mean[0], post.mean());
  std::printf("       var=%.3e (analytic %.3e) ess=%.1f\n", run.summary.posterior_var[0],
              post.variance(), run.summary.ess);
  return 0;
}
