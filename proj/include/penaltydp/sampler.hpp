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

#ifndef PENALTYDP_SAMPLER_HPP_
#define PENALTYDP_SAMPLER_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "penaltydp/accept_math.hpp"
#include "penaltydp/diagnostics.hpp"
#include "penaltydp/model.hpp"
#include "penaltydp/rng.hpp"

// Random-walk Metropolis-Hastings over a ParamBox, in three flavours:
//
//   mh       exact chain, the noiseless reference
//   penalty  noisy log-lik difference d_hat = d_n + sigma * z with the
//            sigma^2/2 penalty in the acceptance exponent
//   expfam   a fresh Gaussian perturbation of the sufficient statistic per
//            iteration; the induced noise on d_n has variance
//            ||phi(theta') - phi(theta)||^2 * xi, penalised the same way
//
// Proposals that leave the box are rejected through the zero prior, but the
// mechanism still runs (on the proposal clamped into the box, so evaluation
// stays inside the model's domain) and the transcript gets an entry: the
// released value exists whether or not the move is taken.

namespace penaltydp {

enum class SamplerMode { kMh, kPenalty, kExpfam };

inline SamplerMode sampler_mode_from_string(const std::string& s) {
  if (s == "mh") return SamplerMode::kMh;
  if (s == "penalty") return SamplerMode::kPenalty;
  if (s == "expfam") return SamplerMode::kExpfam;
  throw ConfigError("unknown sampler mode '" + s + "'");
}

// Symmetric per-coordinate uniform window.
struct ProposalKernel {
  double half_width = 0.0;
};

struct PenaltyConfig {
  double sigma = 0.0;           // noise level; > 0 in penalty mode
  std::uint64_t iterations = 0; // total steps k
  std::uint64_t burn_in = 0;    // discarded prefix, < iterations
  std::uint64_t thin = 1;
};

inline void validate_config(const PenaltyConfig& cfg, SamplerMode mode) {
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (cfg.burn_in >= cfg.iterations) throw ConfigError("burn_in must be < iterations");
  if (cfg.thin < 1) throw ConfigError("thin must be >= 1");
  if (mode == SamplerMode::kPenalty && !(cfg.sigma > 0.0 && std::isfinite(cfg.sigma))) {
    throw ConfigError("penalty mode needs sigma > 0");
  }
}

struct TranscriptEntry {
  std::uint64_t iter = 0;
  Vec theta_prev;
  Vec theta_proposed;
  std::vector<double> noisy_d;  // one value per mechanism invocation
  Vec noisy_suffstat;           // expfam mode only
  double sigma2_used = 0.0;
  bool accepted = false;
};

using Transcript = std::vector<TranscriptEntry>;

struct ChainState {
  Vec theta;
  std::uint64_t iter = 0;
};

// The named streams a single-owner chain consumes.
struct ChainRng {
  explicit ChainRng(std::uint64_t seed)
      : proposal(seed, streams::kProposal),
        noise(seed, streams::kNoise),
        accept(seed, streams::kAccept) {}
  RngStream proposal, noise, accept;
};

inline Vec propose(const ProposalKernel& kernel, const Vec& theta, RngStream& rng) {
  if (!(kernel.half_width > 0.0 && std::isfinite(kernel.half_width))) {
    throw ConfigError("proposal half_width must be > 0");
  }
  Vec out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    out[i] = theta[i] + rng.uniform(-kernel.half_width, kernel.half_width);
  }
  return out;
}

// Shared accept decision, kept in log space: accept iff log(u) < log_alpha.
inline bool accept_decision(double log_alpha, RngStream& accept_rng) {
  const double u = accept_rng.uniform01();
  return std::log(u) < log_alpha;
}

namespace detail {

struct StepwiseCommon {
  Vec theta_proposed;
  Vec theta_eval;       // proposal clamped into the box
  double log_prior_ratio = 0.0;
};

inline StepwiseCommon begin_step(const TargetModel& model, const ChainState& state,
                                 const ProposalKernel& kernel, RngStream& proposal_rng) {
  StepwiseCommon c;
  c.theta_proposed = propose(kernel, state.theta, proposal_rng);
  c.theta_eval = model.param_box.clamp(c.theta_proposed);
  c.log_prior_ratio = model.log_prior(c.theta_proposed) - model.log_prior(state.theta);
  return c;
}

inline TranscriptEntry finish_step(ChainState& state, StepwiseCommon&& c,
                                   std::vector<double> noisy_d, Vec noisy_suffstat,
                                   double d_hat_total, double sigma2, RngStream& accept_rng) {
  const double log_alpha = c.log_prior_ratio + d_hat_total - 0.5 * sigma2;
  const bool accepted = accept_decision(log_alpha, accept_rng);
  TranscriptEntry e{state.iter + 1,        state.theta,  std::move(c.theta_proposed),
                    std::move(noisy_d),    std::move(noisy_suffstat),
                    sigma2,                accepted};
  if (accepted) state.theta = e.theta_proposed;
  ++state.iter;
  return e;
}

}  // namespace detail

inline TranscriptEntry mh_step(const TargetModel& model, const Dataset& data,
                               const ProposalKernel& kernel, ChainState& state,
                               ChainRng& rng) {
  auto c = detail::begin_step(model, state, kernel, rng.proposal);
  const double d = log_lik_diff(model, data, state.theta, c.theta_eval);
  return detail::finish_step(state, std::move(c), {d}, {}, d, 0.0, rng.accept);
}

inline TranscriptEntry penalty_step(const TargetModel& model, const Dataset& data,
                                    const ProposalKernel& kernel, ChainState& state,
                                    double sigma, ChainRng& rng) {
  if (!(sigma > 0.0 && std::isfinite(sigma))) throw ConfigError("penalty_step: sigma > 0");
  auto c = detail::begin_step(model, state, kernel, rng.proposal);
  const double d = log_lik_diff(model, data, state.theta, c.theta_eval);
  const double d_hat = d + sigma * rng.noise.normal();
  return detail::finish_step(state, std::move(c), {d_hat}, {}, d_hat, sigma * sigma,
                             rng.accept);
}

// Exponential-family variant with the sufficient-statistic sum precomputed.
inline TranscriptEntry expfam_penalty_step_cached(const TargetModel& model,
                                                  const Vec& suff_sum, std::size_t n,
                                                  const ProposalKernel& kernel,
                                                  ChainState& state, double xi,
                                                  ChainRng& rng) {
  if (!model.expfam) throw ConfigError("expfam step: model lacks expfam structure");
  if (!(xi > 0.0 && std::isfinite(xi))) throw ConfigError("expfam step: xi > 0");
  const ExpFamStructure& ef = *model.expfam;
  auto c = detail::begin_step(model, state, kernel, rng.proposal);

  Vec s_hat(ef.dim);
  const double root_xi = std::sqrt(xi);
  for (std::size_t j = 0; j < ef.dim; ++j) {
    s_hat[j] = suff_sum[j] + root_xi * rng.noise.normal();
  }

  const Vec phi_old = ef.natural_param(state.theta);
  const Vec phi_new = ef.natural_param(c.theta_eval);
  double dot = 0.0, norm2 = 0.0;
  for (std::size_t j = 0; j < ef.dim; ++j) {
    const double dphi = phi_new[j] - phi_old[j];
    dot += dphi * s_hat[j];
    norm2 += dphi * dphi;
  }
  const double d_hat =
      static_cast<double>(n) * (ef.log_g(c.theta_eval) - ef.log_g(state.theta)) + dot;
  const double sigma2_n = norm2 * xi;
  return detail::finish_step(state, std::move(c), {d_hat}, std::move(s_hat), d_hat,
                             sigma2_n, rng.accept);
}

inline TranscriptEntry expfam_penalty_step(const TargetModel& model, const Dataset& data,
                                           const ProposalKernel& kernel, ChainState& state,
                                           double xi, ChainRng& rng) {
  return expfam_penalty_step_cached(model, suff_stat_sum(model, data), data.size(), kernel,
                                    state, xi, rng);
}

struct ChainSummary {
  std::uint64_t iterations = 0;
  std::uint64_t retained = 0;
  double acceptance_rate = 0.0;
  double ess = 0.0;
  double runtime_seconds = 0.0;
  Vec posterior_mean, posterior_var;
};

struct RunResult {
  std::vector<std::uint64_t> sample_iters;
  std::vector<Vec> samples;
  Transcript transcript;
  ChainSummary summary;
};

// Retention and summary logic shared by run_chain and the sharing protocol.
class SampleCollector {
 public:
  SampleCollector(const PenaltyConfig& cfg, std::size_t dim) : cfg_(cfg), dim_(dim) {}

  void observe(std::uint64_t iter, const Vec& theta, bool accepted) {
    if (accepted) ++accepted_;
    if (iter > cfg_.burn_in && (iter - cfg_.burn_in - 1) % cfg_.thin == 0) {
      iters_.push_back(iter);
      samples_.push_back(theta);
    }
  }

  RunResult finalize(Transcript transcript, double runtime_seconds) {
    RunResult r;
    r.transcript = std::move(transcript);
    r.summary.iterations = cfg_.iterations;
    r.summary.retained = samples_.size();
    r.summary.acceptance_rate =
        static_cast<double>(accepted_) / static_cast<double>(cfg_.iterations);
    r.summary.runtime_seconds = runtime_seconds;
    r.summary.posterior_mean.assign(dim_, 0.0);
    r.summary.posterior_var.assign(dim_, 0.0);
    for (std::size_t j = 0; j < dim_; ++j) {
      std::vector<double> coord(samples_.size());
      for (std::size_t i = 0; i < samples_.size(); ++i) coord[i] = samples_[i][j];
      r.summary.posterior_mean[j] = sample_mean(coord);
      r.summary.posterior_var[j] =
          coord.size() > 1 ? sample_variance(coord) : 0.0;
      if (j == 0) {
        r.summary.ess = coord.size() >= 100 ? ess(coord) : static_cast<double>(coord.size());
      }
    }
    r.sample_iters = std::move(iters_);
    r.samples = std::move(samples_);
    return r;
  }

 private:
  PenaltyConfig cfg_;
  std::size_t dim_;
  std::uint64_t accepted_ = 0;
  std::vector<std::uint64_t> iters_;
  std::vector<Vec> samples_;
};

// Runs a full chain from the box centre (or theta0). Deterministic in seed:
// the same seed replays the identical transcript byte for byte.
inline RunResult run_chain(const TargetModel& model, const Dataset& data,
                           const ProposalKernel& kernel, const PenaltyConfig& cfg,
                           SamplerMode mode, std::uint64_t seed, double xi = 0.0,
                           const std::optional<Vec>& theta0 = std::nullopt) {
  validate_config(cfg, mode);
  if (mode == SamplerMode::kExpfam && !model.expfam) {
    throw ConfigError("expfam mode requires a model with expfam structure");
  }
  ChainState state{theta0 ? *theta0 : model.param_box.center(), 0};
  if (!model.param_box.contains(state.theta)) {
    throw ConfigError("initial point lies outside the parameter box");
  }
  ChainRng rng(seed);
  SampleCollector collector(cfg, state.theta.size());
  Transcript transcript;
  transcript.reserve(cfg.iterations);

  Vec suff_sum;
  if (mode == SamplerMode::kExpfam) suff_sum = suff_stat_sum(model, data);

  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t t = 0; t < cfg.iterations; ++t) {
    TranscriptEntry e;
    switch (mode) {
      case SamplerMode::kMh:
        e = mh_step(model, data, kernel, state, rng);
        break;
      case SamplerMode::kPenalty:
        e = penalty_step(model, data, kernel, state, cfg.sigma, rng);
        break;
      case SamplerMode::kExpfam:
        e = expfam_penalty_step_cached(model, suff_sum, data.size(), kernel, state, xi, rng);
        break;
    }
    collector.observe(state.iter, state.theta, e.accepted);
    transcript.push_back(std::move(e));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return collector.finalize(std::move(transcript), secs);
}

}  // namespace penaltydp

#endif  // PENALTYDP_SAMPLER_HPP_
