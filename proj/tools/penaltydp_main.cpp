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

// penaltydp command-line front end.
//
//   run        config-driven single-owner chain with artifacts on disk
//   accountant privacy planner report as JSON
//   share      N-party protocol launcher (in-process or socket transport)
//   diag       statistics over a samples CSV
//
// Exit codes: 0 success, 2 config error, 3 runtime error, 4 protocol error.
// The PENALTYDP_SEED environment variable overrides the config seed.

#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "penaltydp/experiment.hpp"
#include "penaltydp/jsonio.hpp"
#include "penaltydp/sharing.hpp"

namespace {

using namespace penaltydp;

std::optional<std::uint64_t> seed_override() {
  const char* s = std::getenv("PENALTYDP_SEED");
  if (!s || !*s) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || end == s || *end != '\0') {
    throw ConfigError("PENALTYDP_SEED must be a non-negative integer");
  }
  return static_cast<std::uint64_t>(v);
}

std::string self_exe_path(const char* argv0) {
  char buf[4096];
  const ssize_t k = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (k > 0) {
    buf[k] = '\0';
    return buf;
  }
  return argv0;
}

struct ShareOptions {
  std::string config_path;
  std::uint32_t parties = 0;
  std::string shards_dir;
  double sigma = 0.0;
  std::uint64_t rounds = 0;
  std::string transport = "in_process";
  std::int64_t burn_in = -1;  // -1 means default rounds/10
  std::uint64_t thin = 1;
  int timeout_ms = 5000;
  int max_retries = 3;
  std::uint16_t port = 0;
};

std::string shard_path(const std::string& dir, std::uint32_t id) {
  return (std::filesystem::path(dir) / ("shard_" + std::to_string(id) + ".csv")).string();
}

std::string render_protocol_block(const ProtocolConfig& pc) {
  JsonObject p;
  p.field("num_parties", static_cast<std::uint64_t>(pc.num_parties));
  p.field("sigma", pc.sigma);
  p.field("rounds", static_cast<std::uint64_t>(pc.rounds));
  p.field("transport", pc.transport);
  p.field("burn_in", static_cast<std::uint64_t>(pc.burn_in));
  p.field("thin", static_cast<std::uint64_t>(pc.thin));
  p.field("timeout_ms", pc.timeout_ms);
  p.field("max_round_retries", pc.max_round_retries);
  return p.str();
}

std::string render_share_report(const ExperimentConfig& cfg, const ProtocolConfig& pc,
                                const RunResult& run, const std::string& parties_json) {
  JsonObject o;
  o.raw("config", render_config_json(cfg));
  o.raw("protocol", render_protocol_block(pc));
  o.field("iterations", static_cast<std::uint64_t>(run.summary.iterations));
  o.field("retained", static_cast<std::uint64_t>(run.summary.retained));
  o.field("acceptance_rate", run.summary.acceptance_rate);
  o.field("ess", run.summary.ess);
  o.field("runtime_seconds", run.summary.runtime_seconds);
  o.field("posterior_mean", run.summary.posterior_mean);
  o.field("posterior_var", run.summary.posterior_var);
  o.raw("parties", parties_json);
  return o.str();
}

int cmd_run(const std::string& config_path) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (auto s = seed_override()) cfg.seed = *s;
  const ExperimentOutcome out = run_experiment(cfg);
  std::ifstream in(out.report_path);
  std::cout << in.rdbuf() << "\n";
  return 0;
}

int cmd_accountant(std::uint64_t n, double alpha, double c, double beta, double k0,
                   double s_sensitivity, const std::string& output) {
  const PrivacyPlan plan = make_plan(n, alpha, c, beta, k0);
  std::optional<double> xi_n;
  if (s_sensitivity > 0.0) xi_n = make_expfam_plan(plan, s_sensitivity).xi_n;
  const std::string text = render_privacy_json(privacy_report_values(plan, xi_n));
  if (output.empty()) {
    std::cout << text << "\n";
  } else {
    write_text_file(output, text + "\n");
  }
  return 0;
}

int cmd_diag(const std::string& samples_path, const std::string& config_path) {
  const SamplesTable t = read_samples_csv(samples_path);
  std::vector<double> coord(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) coord[i] = t.rows[i][0];
  JsonObject o;
  o.field("count", static_cast<std::uint64_t>(coord.size()));
  o.field("mean", sample_mean(coord));
  o.field("var", coord.size() > 1 ? sample_variance(coord) : 0.0);
  if (coord.size() >= 100) o.field("ess", ess(coord));
  if (!config_path.empty()) {
    const ExperimentConfig cfg = load_experiment_config(config_path);
    if (cfg.data_path.empty()) throw ConfigError("config.data: required for diag");
    const TargetModel model = build_model(cfg.model);
    const Dataset data =
        load_dataset_csv(cfg.data_path, model.data_space, cfg.bounds_policy);
    const AnalyticPosterior post = analytic_posterior(model, data);
    o.field("ks_statistic", ks_against_analytic(coord, post));
  }
  std::cout << o.str() << "\n";
  return 0;
}

// Hidden subcommand: one socket party in its own process.
int cmd_party(const std::string& config_path, std::uint16_t port, std::uint32_t party_id,
              const std::string& shard_file, double sigma, std::uint64_t seed) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const TargetModel model = build_model(cfg.model);
  Shard shard;
  shard.party_id = party_id;
  shard.offset = 0;
  shard.data = load_dataset_csv(shard_file, model.data_space, cfg.bounds_policy);
  Party party(model, std::move(shard), sigma, seed);
  run_party_socket("127.0.0.1", port, party);
  return 0;
}

int cmd_share(const ShareOptions& opt, const std::string& exe) {
  ExperimentConfig cfg = load_experiment_config(opt.config_path);
  if (auto s = seed_override()) cfg.seed = *s;
  if (!cfg.sampler) {
    throw ConfigError("share: config must carry explicit 'sampler' settings "
                      "(proposal_half_width)");
  }
  const TargetModel model = build_model(cfg.model);
  const ProposalKernel kernel{cfg.sampler->proposal_half_width};

  ProtocolConfig pc;
  pc.num_parties = opt.parties;
  pc.sigma = opt.sigma;
  pc.rounds = opt.rounds;
  pc.transport = opt.transport;
  pc.burn_in = opt.burn_in >= 0 ? static_cast<std::uint64_t>(opt.burn_in) : opt.rounds / 10;
  pc.thin = opt.thin;
  pc.timeout_ms = opt.timeout_ms;
  pc.max_round_retries = opt.max_retries;
  pc.port = opt.port;
  validate_protocol_config(pc);

  std::string parties_json;
  RunResult run;
  if (pc.transport == "in_process") {
    std::vector<Shard> shards;
    std::size_t offset = 0;
    for (std::uint32_t i = 1; i <= opt.parties; ++i) {
      Shard s;
      s.party_id = i;
      s.offset = offset;
      s.data = load_dataset_csv(shard_path(opt.shards_dir, i), model.data_space,
                                cfg.bounds_policy);
      offset += s.data.size();
      shards.push_back(std::move(s));
    }
    ProtocolResult result = run_protocol(model, shards, kernel, pc, cfg.seed);
    run = std::move(result.run);
    std::string arr = "[";
    for (std::size_t i = 0; i < result.parties.size(); ++i) {
      const PartyReport& r = result.parties[i];
      if (i) arr += ',';
      JsonObject p;
      p.field("party_id", static_cast<std::uint64_t>(r.party_id));
      p.field("n_records", static_cast<std::uint64_t>(r.n_records));
      p.field("invocations", static_cast<std::uint64_t>(r.invocations));
      p.field("sigma", r.sigma);
      arr += p.str();
    }
    parties_json = arr + "]";
  } else {
    // Each party runs as its own process; the coordinator never touches the
    // shard files.
    SocketCoordinator coord(model, kernel, pc, cfg.seed);
    std::vector<pid_t> children;
    for (std::uint32_t i = 1; i <= opt.parties; ++i) {
      std::vector<std::string> args = {
          exe,       "party",
          "--config", opt.config_path,
          "--port",   std::to_string(coord.port()),
          "--party-id", std::to_string(i),
          "--shard",  shard_path(opt.shards_dir, i),
          "--sigma",  fmt_double(opt.sigma),
          "--seed",   std::to_string(cfg.seed)};
      const pid_t pid = ::fork();
      if (pid < 0) throw ProtocolError("fork() failed");
      if (pid == 0) {
        std::vector<char*> argv;
        argv.reserve(args.size() + 1);
        for (std::string& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        ::execv(exe.c_str(), argv.data());
        std::perror("execv");
        ::_exit(127);
      }
      children.push_back(pid);
    }
    std::exception_ptr failure;
    try {
      run = coord.run();
    } catch (...) {
      failure = std::current_exception();
    }
    coord.shutdown_sockets();
    bool child_failed = false;
    for (pid_t pid : children) {
      int status = 0;
      ::waitpid(pid, &status, 0);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) child_failed = true;
    }
    if (failure) std::rethrow_exception(failure);
    if (child_failed) throw ProtocolError("a party process exited abnormally");
    const auto& counts = coord.accepted_contributions();
    std::string arr = "[";
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (i) arr += ',';
      JsonObject p;
      p.field("party_id", static_cast<std::uint64_t>(i + 1));
      p.field("contributions", static_cast<std::uint64_t>(counts[i]));
      p.field("sigma", pc.sigma);
      arr += p.str();
    }
    parties_json = arr + "]";
  }

  const std::string samples = render_samples_csv(run, model.param_box.dim());
  const std::string transcript = render_transcript_jsonl(run.transcript);
  const std::string report = render_share_report(cfg, pc, run, parties_json);
  write_artifacts_atomic(cfg.output_dir, samples, transcript, report);
  std::cout << report << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private posterior sampling via the penalty algorithm"};
  app.require_subcommand(1);

  std::string run_config;
  CLI::App* run_cmd = app.add_subcommand("run", "Run one config-driven experiment");
  run_cmd->add_option("--config", run_config, "Experiment config JSON")->required();

  std::uint64_t acc_n = 0;
  double acc_alpha = 0.5, acc_c = 0.0, acc_beta = 0.0, acc_k0 = 1.0, acc_s = 0.0;
  std::string acc_output;
  CLI::App* acc_cmd = app.add_subcommand("accountant", "Privacy planner report");
  acc_cmd->add_option("--n", acc_n, "Dataset size")->required();
  acc_cmd->add_option("--alpha", acc_alpha, "Proposal decay exponent (default 0.5)");
  acc_cmd->add_option("--c", acc_c, "Sensitivity scale")->required();
  acc_cmd->add_option("--beta", acc_beta, "Delta decay exponent")->required();
  acc_cmd->add_option("--k0", acc_k0, "Iteration budget constant (default 1)");
  acc_cmd->add_option("--s-sensitivity", acc_s,
                      "Sufficient-statistic sensitivity (adds xi_n)");
  acc_cmd->add_option("--output", acc_output, "Write the JSON here instead of stdout");

  ShareOptions share;
  CLI::App* share_cmd = app.add_subcommand("share", "Run the N-party protocol");
  share_cmd->add_option("--config", share.config_path, "Experiment config JSON")->required();
  share_cmd->add_option("--parties", share.parties, "Number of parties")->required();
  share_cmd->add_option("--shards", share.shards_dir,
                        "Directory with shard_1.csv..shard_N.csv")
      ->required();
  share_cmd->add_option("--sigma", share.sigma, "Per-party noise s.d.")->required();
  share_cmd->add_option("--rounds", share.rounds, "Chain iterations")->required();
  share_cmd->add_option("--transport", share.transport, "in_process or socket");
  share_cmd->add_option("--burn-in", share.burn_in, "Burn-in (default rounds/10)");
  share_cmd->add_option("--thin", share.thin, "Thinning stride");
  share_cmd->add_option("--timeout-ms", share.timeout_ms, "Per-round collection timeout");
  share_cmd->add_option("--max-retries", share.max_retries, "Round retry budget");
  share_cmd->add_option("--port", share.port, "Coordinator port (0 = ephemeral)");

  std::string diag_samples, diag_config;
  CLI::App* diag_cmd = app.add_subcommand("diag", "Diagnostics over a samples CSV");
  diag_cmd->add_option("--samples", diag_samples, "samples.csv path")->required();
  diag_cmd->add_option("--config", diag_config,
                       "Experiment config (enables the KS statistic)");

  std::string party_config, party_shard;
  std::uint16_t party_port = 0;
  std::uint32_t party_id = 0;
  double party_sigma = 0.0;
  std::uint64_t party_seed = 0;
  CLI::App* party_cmd = app.add_subcommand("party", "");
  party_cmd->group("");  // internal: spawned by 'share --transport socket'
  party_cmd->add_option("--config", party_config)->required();
  party_cmd->add_option("--port", party_port)->required();
  party_cmd->add_option("--party-id", party_id)->required();
  party_cmd->add_option("--shard", party_shard)->required();
  party_cmd->add_option("--sigma", party_sigma)->required();
  party_cmd->add_option("--seed", party_seed)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return cmd_run(run_config);
    if (*acc_cmd) {
      return cmd_accountant(acc_n, acc_alpha, acc_c, acc_beta, acc_k0, acc_s, acc_output);
    }
    if (*share_cmd) return cmd_share(share, self_exe_path(argv[0]));
    if (*diag_cmd) return cmd_diag(diag_samples, diag_config);
    if (*party_cmd) {
      return cmd_party(party_config, party_port, party_id, party_shard, party_sigma,
                       party_seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
