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

#ifndef PENALTYDP_EXPERIMENT_HPP_
#define PENALTYDP_EXPERIMENT_HPP_

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "penaltydp/diagnostics.hpp"
#include "penaltydp/errors.hpp"
#include "penaltydp/jsonio.hpp"
#include "penaltydp/model.hpp"
#include "penaltydp/posterior.hpp"
#include "penaltydp/privacy.hpp"
#include "penaltydp/sampler.hpp"

// Config-driven experiment runner. A single JSON file names the model, the
// data, the sampler mode, and either explicit sampler settings or privacy
// plan inputs. Each run writes three artifacts (samples CSV, transcript
// JSONL, report JSON) into the output directory, staged in a temp directory
// and renamed so the artifacts appear all together or not at all.

namespace penaltydp {

// ---------------------------------------------------------------------------
// Config schema

struct ModelSpec {
  std::string name;
  // Materialized hyperparameters, in a fixed emission order.
  std::vector<std::pair<std::string, double>> params;
};

struct SamplerInputs {
  double sigma = 0.0;   // penalty mode only
  std::uint64_t iterations = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t thin = 1;
  double proposal_half_width = 0.0;
  std::optional<double> xi;  // expfam mode only
};

struct PlanInputs {
  double alpha = 0.5;
  double c_prop = 0.0;
  double beta = 0.0;
  double k0 = 1.0;
  std::optional<std::uint64_t> burn_in;  // default: resolved iterations / 10
  std::uint64_t thin = 1;
};

struct ExperimentConfig {
  ModelSpec model;
  std::string data_path;
  BoundsPolicy bounds_policy = BoundsPolicy::kReject;
  SamplerMode mode = SamplerMode::kMh;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::optional<SamplerInputs> sampler;  // exactly one of sampler / plan
  std::optional<PlanInputs> plan;
};

namespace cfg_detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(path + "." + it.key() + ": unknown field");
  }
}

inline const nlohmann::json* find(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline double get_number(const nlohmann::json& j, const std::string& path, const char* key,
                         std::optional<double> def = std::nullopt) {
  const nlohmann::json* f = find(j, key);
  if (!f) {
    if (def) return *def;
    throw ConfigError(path + "." + key + ": required field is missing");
  }
  if (!f->is_number()) throw ConfigError(path + "." + key + ": must be a number");
  const double v = f->get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + "." + key + ": must be finite");
  return v;
}

inline std::uint64_t get_count(const nlohmann::json& j, const std::string& path,
                               const char* key,
                               std::optional<std::uint64_t> def = std::nullopt) {
  const nlohmann::json* f = find(j, key);
  if (!f) {
    if (def) return *def;
    throw ConfigError(path + "." + key + ": required field is missing");
  }
  if (f->is_number_unsigned()) return f->get<std::uint64_t>();
  // A non-negative integer may still be held in the signed representation.
  if (f->is_number_integer() && f->get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(f->get<std::int64_t>());
  }
  throw ConfigError(path + "." + key + ": must be a non-negative integer");
}

inline std::string get_string(const nlohmann::json& j, const std::string& path,
                              const char* key,
                              std::optional<std::string> def = std::nullopt) {
  const nlohmann::json* f = find(j, key);
  if (!f) {
    if (def) return *def;
    throw ConfigError(path + "." + key + ": required field is missing");
  }
  if (!f->is_string()) throw ConfigError(path + "." + key + ": must be a string");
  return f->get<std::string>();
}

}  // namespace cfg_detail

inline TargetModel build_model(const ModelSpec& spec) {
  const auto p = [&spec](const char* key) {
    for (const auto& kv : spec.params) {
      if (kv.first == key) return kv.second;
    }
    throw ConfigError(std::string("model: missing parameter '") + key + "'");
  };
  try {
    if (spec.name == "beta_bernoulli") {
      return make_beta_bernoulli(p("a"), p("b"), p("theta_min"), p("theta_max"));
    }
    if (spec.name == "gaussian_mean") {
      return make_gaussian_mean(p("prior_mean"), p("prior_sd"), p("y_min"), p("y_max"),
                                p("theta_min"), p("theta_max"));
    }
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  throw ConfigError("model.name: unknown model '" + spec.name + "'");
}

inline ModelSpec parse_model_spec(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": must be an object");
  ModelSpec spec;
  spec.name = cfg_detail::get_string(j, path, "name");
  if (spec.name == "beta_bernoulli") {
    cfg_detail::reject_unknown(j, path, {"name", "a", "b", "theta_min", "theta_max"});
    spec.params = {
        {"a", cfg_detail::get_number(j, path, "a", 1.0)},
        {"b", cfg_detail::get_number(j, path, "b", 1.0)},
        {"theta_min", cfg_detail::get_number(j, path, "theta_min", 0.05)},
        {"theta_max", cfg_detail::get_number(j, path, "theta_max", 0.95)},
    };
  } else if (spec.name == "gaussian_mean") {
    cfg_detail::reject_unknown(
        j, path, {"name", "prior_mean", "prior_sd", "y_min", "y_max", "theta_min",
                  "theta_max"});
    spec.params = {
        {"prior_mean", cfg_detail::get_number(j, path, "prior_mean", 0.0)},
        {"prior_sd", cfg_detail::get_number(j, path, "prior_sd", 1.0)},
        {"y_min", cfg_detail::get_number(j, path, "y_min", -1.0)},
        {"y_max", cfg_detail::get_number(j, path, "y_max", 1.0)},
        {"theta_min", cfg_detail::get_number(j, path, "theta_min", -1.0)},
        {"theta_max", cfg_detail::get_number(j, path, "theta_max", 1.0)},
    };
  } else {
    throw ConfigError(path + ".name: unknown model '" + spec.name + "'");
  }
  return spec;
}

// Parses and validates the full config, materializing every default so the
// echo in the report states exactly what ran.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: must be a JSON object");
  cfg_detail::reject_unknown(j, "config",
                             {"model", "data", "bounds_policy", "mode", "seed",
                              "output_dir", "sampler", "plan"});
  ExperimentConfig cfg;
  const nlohmann::json* model = cfg_detail::find(j, "model");
  if (!model) throw ConfigError("config.model: required field is missing");
  cfg.model = parse_model_spec(*model, "config.model");
  cfg.data_path = cfg_detail::get_string(j, "config", "data", std::string());
  const std::string policy =
      cfg_detail::get_string(j, "config", "bounds_policy", std::string("reject"));
  if (policy == "reject") {
    cfg.bounds_policy = BoundsPolicy::kReject;
  } else if (policy == "clip") {
    cfg.bounds_policy = BoundsPolicy::kClip;
  } else {
    throw ConfigError("config.bounds_policy: must be 'reject' or 'clip'");
  }
  try {
    cfg.mode = sampler_mode_from_string(cfg_detail::get_string(j, "config", "mode"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.mode: ") + e.what());
  }
  cfg.seed = cfg_detail::get_count(j, "config", "seed", std::uint64_t{0});
  cfg.output_dir = cfg_detail::get_string(j, "config", "output_dir");
  if (cfg.output_dir.empty()) throw ConfigError("config.output_dir: must be nonempty");

  const nlohmann::json* sampler = cfg_detail::find(j, "sampler");
  const nlohmann::json* plan = cfg_detail::find(j, "plan");
  if ((sampler == nullptr) == (plan == nullptr)) {
    throw ConfigError("config: provide exactly one of 'sampler' or 'plan'");
  }
  if (sampler) {
    const std::string path = "config.sampler";
    if (!sampler->is_object()) throw ConfigError(path + ": must be an object");
    cfg_detail::reject_unknown(
        *sampler, path,
        {"sigma", "iterations", "burn_in", "thin", "proposal_half_width", "xi"});
    SamplerInputs s;
    s.sigma = cfg_detail::get_number(*sampler, path, "sigma", 0.0);
    s.iterations = cfg_detail::get_count(*sampler, path, "iterations");
    s.burn_in = cfg_detail::get_count(*sampler, path, "burn_in", s.iterations / 10);
    s.thin = cfg_detail::get_count(*sampler, path, "thin", std::uint64_t{1});
    s.proposal_half_width = cfg_detail::get_number(*sampler, path, "proposal_half_width");
    if (cfg_detail::find(*sampler, "xi")) {
      s.xi = cfg_detail::get_number(*sampler, path, "xi");
    }
    if (cfg.mode != SamplerMode::kPenalty && s.sigma != 0.0) {
      throw ConfigError(path + ".sigma: only penalty mode uses sigma");
    }
    if (cfg.mode == SamplerMode::kExpfam) {
      if (!s.xi || !(*s.xi > 0.0)) throw ConfigError(path + ".xi: expfam mode needs xi > 0");
    } else if (s.xi) {
      throw ConfigError(path + ".xi: only expfam mode uses xi");
    }
    try {
      validate_config(PenaltyConfig{s.sigma, s.iterations, s.burn_in, s.thin}, cfg.mode);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    cfg.sampler = std::move(s);
  } else {
    const std::string path = "config.plan";
    if (!plan->is_object()) throw ConfigError(path + ": must be an object");
    cfg_detail::reject_unknown(*plan, path,
                               {"alpha", "c_prop", "beta", "k0", "burn_in", "thin"});
    if (cfg.mode == SamplerMode::kMh) {
      throw ConfigError(path + ": plan inputs require mode 'penalty' or 'expfam'");
    }
    PlanInputs p;
    p.alpha = cfg_detail::get_number(*plan, path, "alpha", 0.5);
    p.c_prop = cfg_detail::get_number(*plan, path, "c_prop");
    p.beta = cfg_detail::get_number(*plan, path, "beta");
    p.k0 = cfg_detail::get_number(*plan, path, "k0", 1.0);
    if (cfg_detail::find(*plan, "burn_in")) {
      p.burn_in = cfg_detail::get_count(*plan, path, "burn_in");
    }
    p.thin = cfg_detail::get_count(*plan, path, "thin", std::uint64_t{1});
    if (!(p.c_prop > 0.0)) throw ConfigError(path + ".c_prop: must be > 0");
    if (!(p.beta > 0.0)) throw ConfigError(path + ".beta: must be > 0");
    if (!(p.k0 > 0.0)) throw ConfigError(path + ".k0: must be > 0");
    if (!(p.alpha > 0.0 && p.alpha <= 1.0)) {
      throw ConfigError(path + ".alpha: must lie in (0, 1]");
    }
    cfg.plan = std::move(p);
  }
  return cfg;
}

inline ExperimentConfig parse_experiment_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_experiment_config(j);
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Reports

struct PrivacyReportValues {
  double sigma = 0.0;
  std::uint64_t k_n = 0;
  double eps_bound = 0.0;
  double delta_bound = 0.0;
  double eps_direct = 0.0;
  double delta_direct = 0.0;
  double per_call_eps = 0.0;
  double per_call_delta = 0.0;
  std::optional<double> xi_n;
};

struct DiagnosticsReport {
  double acceptance_rate = 0.0;
  double ess = 0.0;
  Vec posterior_mean, posterior_var;
  std::optional<double> ks_statistic;
  std::optional<PrivacyReportValues> privacy;
};

// Direct advanced-composition evaluation of the plan's per-call guarantee
// over the planned number of iterations, with the slack term n^{-beta}.
inline PrivacyParams plan_direct_composition(const PrivacyPlan& plan) {
  const PrivacyParams per_call{plan.per_call_eps, plan.per_call_delta};
  const double delta_prime = std::pow(static_cast<double>(plan.n), -plan.beta);
  return advanced_composition(per_call, plan.k_n, delta_prime);
}

inline PrivacyReportValues privacy_report_values(const PrivacyPlan& plan,
                                                 std::optional<double> xi_n = std::nullopt) {
  const PrivacyParams direct = plan_direct_composition(plan);
  PrivacyReportValues v;
  v.sigma = plan.sigma;
  v.k_n = plan.k_n;
  v.eps_bound = plan.eps_bound;
  v.delta_bound = plan.delta_bound;
  v.eps_direct = direct.epsilon;
  v.delta_direct = direct.delta;
  v.per_call_eps = plan.per_call_eps;
  v.per_call_delta = plan.per_call_delta;
  v.xi_n = xi_n;
  return v;
}

inline std::string render_privacy_json(const PrivacyReportValues& v) {
  JsonObject o;
  o.field("sigma", v.sigma);
  o.field("k_n", static_cast<std::uint64_t>(v.k_n));
  o.field("eps_bound", v.eps_bound);
  o.field("delta_bound", v.delta_bound);
  o.field("eps_direct", v.eps_direct);
  o.field("delta_direct", v.delta_direct);
  o.field("per_call_eps", v.per_call_eps);
  o.field("per_call_delta", v.per_call_delta);
  if (v.xi_n) o.field("xi_n", *v.xi_n);
  return o.str();
}

// ---------------------------------------------------------------------------
// Plan resolution

// Everything the chain needs, whether it came from explicit sampler settings
// or from the privacy planner.
struct ResolvedRun {
  PenaltyConfig chain;
  ProposalKernel kernel;
  double xi = 0.0;
  std::optional<PrivacyReportValues> privacy;
};

// The sensitivity scale c of Assumption 3/4 induced by a proposal that moves
// at most c_prop * n^{-alpha} per coordinate.
inline double sensitivity_scale(const TargetModel& model, SamplerMode mode, double c_prop) {
  if (mode == SamplerMode::kExpfam) {
    if (!model.expfam) throw ConfigError("expfam plan requires expfam structure");
    return model.expfam->natural_param_lipschitz * c_prop;
  }
  return 2.0 * static_cast<double>(model.param_box.dim()) * model.lipschitz_M * c_prop;
}

inline ResolvedRun resolve_run(const ExperimentConfig& cfg, const TargetModel& model,
                               std::size_t n_records) {
  ResolvedRun r;
  if (cfg.sampler) {
    const SamplerInputs& s = *cfg.sampler;
    r.chain = PenaltyConfig{s.sigma, s.iterations, s.burn_in, s.thin};
    r.kernel = ProposalKernel{s.proposal_half_width};
    r.xi = s.xi.value_or(0.0);
    return r;
  }
  const PlanInputs& p = *cfg.plan;
  const double n = static_cast<double>(n_records);
  const double c = sensitivity_scale(model, cfg.mode, p.c_prop);
  const PrivacyPlan plan = make_plan(n_records, p.alpha, c, p.beta, p.k0);
  r.kernel = ProposalKernel{p.c_prop * std::pow(n, -p.alpha)};
  std::optional<double> xi_n;
  if (cfg.mode == SamplerMode::kExpfam) {
    const ExpFamPlan ef = make_expfam_plan(plan, model.expfam->suff_stat_l2_sensitivity);
    r.xi = ef.xi_n;
    xi_n = ef.xi_n;
  }
  const std::uint64_t burn = p.burn_in.value_or(plan.k_n / 10);
  r.chain = PenaltyConfig{plan.sigma, plan.k_n, burn, p.thin};
  r.privacy = privacy_report_values(plan, xi_n);
  try {
    validate_config(r.chain, cfg.mode);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.plan: resolved chain invalid: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Artifact writers

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << text;
  if (!out.good()) throw DataError("write failed: " + path);
}

inline std::string render_samples_csv(const RunResult& run, std::size_t dim) {
  std::string s = "iter";
  for (std::size_t j = 0; j < dim; ++j) s += ",theta_" + std::to_string(j + 1);
  s += '\n';
  for (std::size_t i = 0; i < run.samples.size(); ++i) {
    s += std::to_string(run.sample_iters[i]);
    for (std::size_t j = 0; j < dim; ++j) {
      s += ',';
      s += fmt_double(run.samples[i][j]);
    }
    s += '\n';
  }
  return s;
}

inline std::string render_transcript_line(const TranscriptEntry& e) {
  JsonObject o;
  o.field("iter", static_cast<std::uint64_t>(e.iter));
  o.field("theta_prev", e.theta_prev);
  o.field("theta_prop", e.theta_proposed);
  if (e.noisy_d.size() == 1) {
    o.field("noisy_d", e.noisy_d[0]);
  } else {
    o.field("noisy_d", e.noisy_d);
  }
  if (!e.noisy_suffstat.empty()) o.field("noisy_suffstat", e.noisy_suffstat);
  o.field("sigma2", e.sigma2_used);
  o.field("accepted", e.accepted);
  return o.str();
}

inline std::string render_transcript_jsonl(const Transcript& transcript) {
  std::string s;
  for (const TranscriptEntry& e : transcript) {
    s += render_transcript_line(e);
    s += '\n';
  }
  return s;
}

inline std::string render_model_spec_json(const ModelSpec& spec) {
  JsonObject o;
  o.field("name", spec.name);
  for (const auto& kv : spec.params) o.field(kv.first, kv.second);
  return o.str();
}

inline std::string render_config_json(const ExperimentConfig& cfg) {
  JsonObject o;
  o.raw("model", render_model_spec_json(cfg.model));
  o.field("data", cfg.data_path);
  o.field("bounds_policy", cfg.bounds_policy == BoundsPolicy::kReject ? "reject" : "clip");
  const char* mode = cfg.mode == SamplerMode::kMh
                         ? "mh"
                         : (cfg.mode == SamplerMode::kPenalty ? "penalty" : "expfam");
  o.field("mode", mode);
  o.field("seed", static_cast<std::uint64_t>(cfg.seed));
  o.field("output_dir", cfg.output_dir);
  if (cfg.sampler) {
    JsonObject s;
    s.field("sigma", cfg.sampler->sigma);
    s.field("iterations", static_cast<std::uint64_t>(cfg.sampler->iterations));
    s.field("burn_in", static_cast<std::uint64_t>(cfg.sampler->burn_in));
    s.field("thin", static_cast<std::uint64_t>(cfg.sampler->thin));
    s.field("proposal_half_width", cfg.sampler->proposal_half_width);
    if (cfg.sampler->xi) s.field("xi", *cfg.sampler->xi);
    o.raw("sampler", s.str());
  }
  if (cfg.plan) {
    JsonObject p;
    p.field("alpha", cfg.plan->alpha);
    p.field("c_prop", cfg.plan->c_prop);
    p.field("beta", cfg.plan->beta);
    p.field("k0", cfg.plan->k0);
    if (cfg.plan->burn_in) p.field("burn_in", static_cast<std::uint64_t>(*cfg.plan->burn_in));
    p.field("thin", static_cast<std::uint64_t>(cfg.plan->thin));
    o.raw("plan", p.str());
  }
  return o.str();
}

inline std::string render_report_json(const ExperimentConfig& cfg, std::size_t n_records,
                                      const ResolvedRun& resolved, const RunResult& run,
                                      const DiagnosticsReport& diag) {
  JsonObject o;
  o.raw("config", render_config_json(cfg));
  o.field("n_records", static_cast<std::uint64_t>(n_records));
  const char* mode = cfg.mode == SamplerMode::kMh
                         ? "mh"
                         : (cfg.mode == SamplerMode::kPenalty ? "penalty" : "expfam");
  o.field("mode", mode);
  o.field("iterations", static_cast<std::uint64_t>(resolved.chain.iterations));
  o.field("burn_in", static_cast<std::uint64_t>(resolved.chain.burn_in));
  o.field("thin", static_cast<std::uint64_t>(resolved.chain.thin));
  o.field("sigma", resolved.chain.sigma);
  if (cfg.mode == SamplerMode::kExpfam) o.field("xi", resolved.xi);
  o.field("proposal_half_width", resolved.kernel.half_width);
  o.field("retained", static_cast<std::uint64_t>(run.summary.retained));
  o.field("acceptance_rate", diag.acceptance_rate);
  o.field("ess", diag.ess);
  o.field("runtime_seconds", run.summary.runtime_seconds);
  o.field("posterior_mean", diag.posterior_mean);
  o.field("posterior_var", diag.posterior_var);
  if (diag.ks_statistic) o.field("ks_statistic", *diag.ks_statistic);
  if (diag.privacy) o.raw("privacy", render_privacy_json(*diag.privacy));
  return o.str();
}

// Stages the three artifact files in a temp directory next to the target and
// swaps it in. A failure while staging leaves the target untouched.
inline void write_artifacts_atomic(const std::string& output_dir, const std::string& samples,
                                   const std::string& transcript, const std::string& report) {
  namespace fs = std::filesystem;
  const fs::path final_dir(output_dir);
  const fs::path tmp_dir(output_dir + ".tmp-" + std::to_string(::getpid()));
  std::error_code ec;
  fs::remove_all(tmp_dir, ec);
  try {
    fs::create_directories(tmp_dir);
    write_text_file((tmp_dir / "samples.csv").string(), samples);
    write_text_file((tmp_dir / "transcript.jsonl").string(), transcript);
    write_text_file((tmp_dir / "report.json").string(), report);
    fs::remove_all(final_dir);
    fs::rename(tmp_dir, final_dir);
  } catch (...) {
    fs::remove_all(tmp_dir, ec);
    throw;
  }
}

// ---------------------------------------------------------------------------
// Diagnostics assembly

inline DiagnosticsReport summarize_run(const TargetModel& model, const Dataset& data,
                                       const RunResult& run,
                                       std::optional<PrivacyReportValues> privacy) {
  DiagnosticsReport diag;
  diag.acceptance_rate = run.summary.acceptance_rate;
  diag.ess = run.summary.ess;
  diag.posterior_mean = run.summary.posterior_mean;
  diag.posterior_var = run.summary.posterior_var;
  diag.privacy = std::move(privacy);
  if ((model.name == "beta_bernoulli" || model.name == "gaussian_mean") &&
      !run.samples.empty()) {
    std::vector<double> coord(run.samples.size());
    for (std::size_t i = 0; i < coord.size(); ++i) coord[i] = run.samples[i][0];
    const AnalyticPosterior post = analytic_posterior(model, data);
    diag.ks_statistic = ks_against_analytic(coord, post);
  }
  return diag;
}

struct ExperimentOutcome {
  RunResult run;
  DiagnosticsReport diag;
  std::string samples_path, transcript_path, report_path;
};

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  if (cfg.data_path.empty()) throw ConfigError("config.data: required field is missing");
  const TargetModel model = build_model(cfg.model);
  const Dataset data = load_dataset_csv(cfg.data_path, model.data_space, cfg.bounds_policy);
  const ResolvedRun resolved = resolve_run(cfg, model, data.size());

  ExperimentOutcome out;
  out.run = run_chain(model, data, resolved.kernel, resolved.chain, cfg.mode, cfg.seed,
                      resolved.xi);
  out.diag = summarize_run(model, data, out.run, resolved.privacy);

  const std::string samples = render_samples_csv(out.run, model.param_box.dim());
  const std::string transcript = render_transcript_jsonl(out.run.transcript);
  const std::string report =
      render_report_json(cfg, data.size(), resolved, out.run, out.diag);
  write_artifacts_atomic(cfg.output_dir, samples, transcript, report);

  namespace fs = std::filesystem;
  out.samples_path = (fs::path(cfg.output_dir) / "samples.csv").string();
  out.transcript_path = (fs::path(cfg.output_dir) / "transcript.jsonl").string();
  out.report_path = (fs::path(cfg.output_dir) / "report.json").string();
  return out;
}

// ---------------------------------------------------------------------------
// Samples CSV reader (diagnostics subcommand, tests)

struct SamplesTable {
  std::vector<std::uint64_t> iters;
  std::vector<Vec> rows;
};

inline SamplesTable read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open samples file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("iter", 0) != 0) {
    throw DataError(path + ": expected header starting with 'iter'");
  }
  SamplesTable t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    Vec row;
    std::uint64_t iter = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          iter = std::stoull(cell);
          first = false;
        } else {
          row.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(lineno) + ": bad value '" + cell + "'");
      }
    }
    if (first || row.empty()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": short row");
    }
    t.iters.push_back(iter);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace penaltydp

#endif  // PENALTYDP_EXPERIMENT_HPP_
