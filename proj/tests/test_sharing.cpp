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
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <penaltydp/sampler.hpp>
#include <penaltydp/sharing.hpp>

#include "helpers.hpp"

using penaltydp::ConfigError;
using penaltydp::Dataset;
using penaltydp::DecodeError;
using penaltydp::MessageKind;
using penaltydp::Party;
using penaltydp::PartyMessage;
using penaltydp::PenaltyConfig;
using penaltydp::ProposalKernel;
using penaltydp::ProtocolConfig;
using penaltydp::ProtocolError;
using penaltydp::ProtocolResult;
using penaltydp::RunResult;
using penaltydp::SamplerMode;
using penaltydp::Shard;
using penaltydp::SocketCoordinator;
using penaltydp::TargetModel;
using penaltydp::Vec;
using penaltydp::decode_message;
using penaltydp::encode_message;
using penaltydp::run_protocol;
using penaltydp::split_dataset;

TEST_CASE("split dataset tiles the records contiguously") {
  const Dataset full = testutil::bernoulli_data(10, 4);
  const auto shards = split_dataset(full, 3);
  REQUIRE(shards.size() == 3);
  CHECK(shards[0].party_id == 1);
  CHECK(shards[0].offset == 0);
  CHECK(shards[0].data.size() == 4);
  CHECK(shards[1].offset == 4);
  CHECK(shards[1].data.size() == 3);
  CHECK(shards[2].offset == 7);
  CHECK(shards[2].data.size() == 3);
  CHECK(shards[0].data.records[3] == full.records[3]);
  CHECK(shards[2].data.records[0] == full.records[7]);
  CHECK_NOTHROW(penaltydp::validate_partition(shards));

  CHECK_THROWS_AS(split_dataset(full, 0), ConfigError);
  CHECK_THROWS_AS(split_dataset(testutil::bernoulli_data(2, 1), 3), ConfigError);
}

TEST_CASE("partition validation rejects broken tilings") {
  const Dataset full = testutil::bernoulli_data(9, 3);
  auto shards = split_dataset(full, 3);

  auto dup = shards;
  dup[1].party_id = 1;
  CHECK_THROWS_WITH(penaltydp::validate_partition(dup),
                    Catch::Matchers::ContainsSubstring("duplicate"));

  auto range = shards;
  range[2].party_id = 5;
  CHECK_THROWS_WITH(penaltydp::validate_partition(range),
                    Catch::Matchers::ContainsSubstring("outside"));

  auto gap = shards;
  gap[1].offset = 4;
  CHECK_THROWS_WITH(penaltydp::validate_partition(gap),
                    Catch::Matchers::ContainsSubstring("gap or overlap"));

  auto empty = shards;
  empty[0].data.records.clear();
  CHECK_THROWS_WITH(penaltydp::validate_partition(empty),
                    Catch::Matchers::ContainsSubstring("no records"));

  CHECK_THROWS_AS(penaltydp::validate_partition({}), ConfigError);
}

TEST_CASE("wire messages survive an encode-decode round trip") {
  std::mt19937_64 gen(4711);
  std::uniform_real_distribution<double> real(-40.0, 40.0);
  for (int i = 0; i < 1000; ++i) {
    PartyMessage m;
    m.round = gen() >> 12;
    switch (i % 4) {
      case 0: {
        m.kind = MessageKind::kProposal;
        const std::size_t d = 1 + i % 3;
        for (std::size_t k = 0; k < d; ++k) {
          m.theta.push_back(real(gen));
          m.theta_prime.push_back(real(gen));
        }
        break;
      }
      case 1:
        m.kind = MessageKind::kContribution;
        m.party_id = 1 + static_cast<std::uint32_t>(gen() % 64);
        m.noisy_d = real(gen) * std::exp(real(gen) / 8.0);
        break;
      case 2:
        m.kind = MessageKind::kDecision;
        m.accepted = (gen() & 1) != 0;
        break;
      default:
        m.kind = MessageKind::kShutdown;
        break;
    }
    const PartyMessage back = decode_message(encode_message(m));
    REQUIRE(back.kind == m.kind);
    REQUIRE(back.round == m.round);
    REQUIRE(back.theta == m.theta);
    REQUIRE(back.theta_prime == m.theta_prime);
    REQUIRE(back.party_id == m.party_id);
    REQUIRE(back.noisy_d == m.noisy_d);  // 17 significant digits, exact
    REQUIRE(back.accepted == m.accepted);
  }
}

TEST_CASE("decoder accepts any field order and ignores extras") {
  const PartyMessage m = decode_message(
      R"({"noisy_d":-2.5,"party_id":3,"kind":"CONTRIBUTION","round":17,"memo":"x"})");
  CHECK(m.kind == MessageKind::kContribution);
  CHECK(m.round == 17);
  CHECK(m.party_id == 3);
  CHECK(m.noisy_d == -2.5);
}

TEST_CASE("decoder reports precise causes for bad frames") {
  // Truncated frame: the parse error carries the byte offset it died at.
  const std::string good =
      encode_message([] {
        PartyMessage p;
        p.kind = MessageKind::kProposal;
        p.round = 4;
        p.theta = {0.25};
        p.theta_prime = {0.3};
        return p;
      }());
  const std::string cut = good.substr(0, good.size() / 2);
  try {
    decode_message(cut);
    FAIL("expected DecodeError");
  } catch (const DecodeError& e) {
    CHECK(e.byte_offset > 0);
    CHECK(e.byte_offset <= cut.size() + 1);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }

  CHECK_THROWS_AS(decode_message("[1,2,3]"), DecodeError);
  CHECK_THROWS_WITH(decode_message(R"({"round":1,"kind":"GOSSIP"})"),
                    Catch::Matchers::ContainsSubstring("kind"));
  CHECK_THROWS_WITH(decode_message(R"({"kind":"SHUTDOWN"})"),
                    Catch::Matchers::ContainsSubstring("round"));
  CHECK_THROWS_WITH(decode_message(R"({"round":-3,"kind":"SHUTDOWN"})"),
                    Catch::Matchers::ContainsSubstring("round"));
  CHECK_THROWS_WITH(decode_message(R"({"round":1,"kind":"CONTRIBUTION","party_id":2})"),
                    Catch::Matchers::ContainsSubstring("noisy_d"));
  CHECK_THROWS_WITH(
      decode_message(R"({"round":1,"kind":"CONTRIBUTION","party_id":0,"noisy_d":1.0})"),
      Catch::Matchers::ContainsSubstring("party_id"));
  CHECK_THROWS_WITH(
      decode_message(
          R"({"round":1,"kind":"PROPOSAL","theta":[0.1],"theta_prime":[0.1,0.2]})"),
      Catch::Matchers::ContainsSubstring("equal length"));
  CHECK_THROWS_WITH(
      decode_message(R"({"round":1,"kind":"PROPOSAL","theta":[],"theta_prime":[]})"),
      Catch::Matchers::ContainsSubstring("theta"));
}

TEST_CASE("party contributions are unbiased with the configured variance") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.05, 0.95);
  const Dataset full = testutil::bernoulli_data(100, 60);
  auto shards = split_dataset(full, 3);
  const double sigma = 0.8;
  std::vector<Party> parties;
  for (auto& s : shards) parties.emplace_back(m, std::move(s), sigma, 2025);

  const Vec theta{0.5}, theta_prime{0.55};
  const double d_full = penaltydp::log_lik_diff(m, full, theta, theta_prime);

  const int reps = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int r = 0; r < reps; ++r) {
    double total = 0.0;
    for (Party& p : parties) total += p.contribution(theta, theta_prime);
    sum += total;
    sumsq += total * total;
  }
  const double mean = sum / reps;
  const double var = sumsq / reps - mean * mean;
  const double var_expected = 3.0 * sigma * sigma;
  CHECK(std::abs(mean - d_full) < 3.5 * std::sqrt(var_expected / reps));
  CHECK(std::abs(var - var_expected) < 3.5 * var_expected * std::sqrt(2.0 / reps));
  for (const Party& p : parties) CHECK(p.invocations() == reps);
}

TEST_CASE("party clamps the proposal and validates sigma") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.2, 0.8);
  const Dataset full = testutil::bernoulli_data(10, 5);
  Shard s{1, 0, full};
  CHECK_THROWS_AS(Party(m, s, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(Party(m, s, -1.0, 1), ConfigError);

  // An out-of-box proposal is evaluated at the clamped point, so two parties
  // with the same stream fed theta_prime = 0.9 and 0.8 agree exactly.
  Party a(m, s, 1.0, 77);
  Party b(m, s, 1.0, 77);
  CHECK(a.contribution({0.5}, {0.9}) == b.contribution({0.5}, {0.8}));
}

TEST_CASE("single-party protocol reproduces the single-owner chain exactly") {
  const TargetModel m = penaltydp::make_beta_bernoulli(2.0, 2.0, 0.05, 0.95);
  const Dataset data = testutil::bernoulli_data(100, 60);
  const ProposalKernel kernel{0.07};
  const std::uint64_t seed = 42;

  const PenaltyConfig cfg{1.2, 5000, 500, 3};
  const RunResult solo =
      penaltydp::run_chain(m, data, kernel, cfg, SamplerMode::kPenalty, seed);

  ProtocolConfig pc;
  pc.num_parties = 1;
  pc.sigma = 1.2;
  pc.rounds = 5000;
  pc.burn_in = 500;
  pc.thin = 3;
  const ProtocolResult shared =
      run_protocol(m, split_dataset(data, 1), kernel, pc, seed);

  REQUIRE(shared.run.samples.size() == solo.samples.size());
  for (std::size_t i = 0; i < solo.samples.size(); ++i) {
    REQUIRE(shared.run.samples[i] == solo.samples[i]);
  }
  REQUIRE(shared.run.transcript.size() == solo.transcript.size());
  for (std::size_t i = 0; i < solo.transcript.size(); ++i) {
    REQUIRE(shared.run.transcript[i].noisy_d == solo.transcript[i].noisy_d);
    REQUIRE(shared.run.transcript[i].sigma2_used == solo.transcript[i].sigma2_used);
    REQUIRE(shared.run.transcript[i].accepted == solo.transcript[i].accepted);
  }
  CHECK(shared.run.summary.acceptance_rate == solo.summary.acceptance_rate);
  CHECK(shared.parties[0].invocations == 5000);
}

TEST_CASE("socket transport replays the in-process trajectory") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.05, 0.95);
  const Dataset data = testutil::bernoulli_data(150, 90);
  const ProposalKernel kernel{0.06};
  const std::uint64_t seed = 2024;

  ProtocolConfig pc;
  pc.num_parties = 3;
  pc.sigma = 1.0;
  pc.rounds = 3000;
  pc.burn_in = 300;

  const ProtocolResult in_proc = run_protocol(m, split_dataset(data, 3), kernel, pc, seed);
  pc.transport = "socket";
  const ProtocolResult socket = run_protocol(m, split_dataset(data, 3), kernel, pc, seed);

  REQUIRE(socket.run.samples.size() == in_proc.run.samples.size());
  for (std::size_t i = 0; i < socket.run.samples.size(); ++i) {
    REQUIRE(socket.run.samples[i] == in_proc.run.samples[i]);
  }
  REQUIRE(socket.run.transcript.size() == in_proc.run.transcript.size());
  for (std::size_t i = 0; i < socket.run.transcript.size(); ++i) {
    REQUIRE(socket.run.transcript[i].noisy_d == in_proc.run.transcript[i].noisy_d);
    REQUIRE(socket.run.transcript[i].accepted == in_proc.run.transcript[i].accepted);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(socket.parties[i].invocations == 3000);
    CHECK(socket.parties[i].n_records == in_proc.parties[i].n_records);
  }
}

TEST_CASE("transcript carries one noisy value per party per round") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.05, 0.95);
  const Dataset data = testutil::bernoulli_data(60, 36);
  ProtocolConfig pc;
  pc.num_parties = 4;
  pc.sigma = 0.9;
  pc.rounds = 500;
  const ProtocolResult r = run_protocol(m, split_dataset(data, 4), ProposalKernel{0.05},
                                        pc, 5);
  std::size_t values = 0;
  for (const auto& e : r.run.transcript) {
    REQUIRE(e.noisy_d.size() == 4);
    REQUIRE(e.sigma2_used == 4.0 * 0.9 * 0.9);
    values += e.noisy_d.size();
  }
  CHECK(values == 4 * 500);
}

TEST_CASE("acceptance rate does not improve as parties are added") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.05, 0.95);
  const Dataset data = testutil::bernoulli_data(200, 120);
  const ProposalKernel kernel{0.05};
  const auto rate = [&](std::uint32_t n_parties) {
    ProtocolConfig pc;
    pc.num_parties = n_parties;
    pc.sigma = 1.0;
    pc.rounds = 50000;
    pc.burn_in = 5000;
    return run_protocol(m, split_dataset(data, n_parties), kernel, pc, 99)
        .run.summary.acceptance_rate;
  };
  const double r1 = rate(1), r2 = rate(2), r4 = rate(4);
  // Total injected variance grows with N, so the expected acceptance drops.
  // Allow a small Monte Carlo slack on the neighbouring comparisons.
  CHECK(r1 > r2 - 0.01);
  CHECK(r2 > r4 - 0.01);
  CHECK(r1 > r4 + 0.02);
}

TEST_CASE("protocol validates its configuration") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.2, 0.8);
  const Dataset data = testutil::bernoulli_data(12, 6);
  const auto shards = split_dataset(data, 3);
  ProtocolConfig pc;
  pc.num_parties = 3;
  pc.sigma = 1.0;
  pc.rounds = 10;

  ProtocolConfig bad = pc;
  bad.num_parties = 2;
  CHECK_THROWS_AS(run_protocol(m, shards, ProposalKernel{0.05}, bad, 1), ConfigError);
  bad = pc;
  bad.transport = "carrier_pigeon";
  CHECK_THROWS_AS(run_protocol(m, shards, ProposalKernel{0.05}, bad, 1), ConfigError);
  bad = pc;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(run_protocol(m, shards, ProposalKernel{0.05}, bad, 1), ConfigError);
  bad = pc;
  bad.rounds = 0;
  CHECK_THROWS_AS(run_protocol(m, shards, ProposalKernel{0.05}, bad, 1), ConfigError);
  bad = pc;
  bad.timeout_ms = 0;
  CHECK_THROWS_AS(run_protocol(m, shards, ProposalKernel{0.05}, bad, 1), ConfigError);
}

// ---------------------------------------------------------------------------
// Scripted raw-socket peers for the retry and failure paths

namespace {

struct StubLog {
  std::vector<PartyMessage> proposals;
  int decisions = 0;
  bool saw_shutdown = false;
  std::string error;
};

// Connects to the coordinator and follows a script keyed by how many
// proposals have been seen. script(k, msg) returns the frames to send back
// for the k-th proposal (0-based).
template <typename Script>
void run_stub(std::uint16_t port, StubLog& log, Script script) {
  using namespace penaltydp::detail_net;
  try {
    Fd fd = connect_local(port);
    LineReader reader;
    for (;;) {
      auto line = read_line_blocking(fd.get(), reader, -1);
      if (!line) return;  // coordinator closed
      const PartyMessage m = decode_message(*line);
      if (m.kind == MessageKind::kShutdown) {
        log.saw_shutdown = true;
        return;
      }
      if (m.kind == MessageKind::kDecision) {
        ++log.decisions;
        continue;
      }
      if (m.kind == MessageKind::kProposal) {
        const std::size_t k = log.proposals.size();
        log.proposals.push_back(m);
        for (const std::string& frame : script(k, m)) {
          send_line(fd.get(), frame);
        }
      }
    }
  } catch (const std::exception& e) {
    log.error = e.what();
  }
}

std::string contribution_frame(std::uint64_t round, std::uint32_t party_id, double v) {
  PartyMessage c;
  c.kind = MessageKind::kContribution;
  c.round = round;
  c.party_id = party_id;
  c.noisy_d = v;
  return encode_message(c);
}

ProtocolConfig stub_config(std::uint64_t rounds, int timeout_ms, int retries) {
  ProtocolConfig pc;
  pc.num_parties = 1;
  pc.sigma = 1.0;
  pc.rounds = rounds;
  pc.transport = "socket";
  pc.timeout_ms = timeout_ms;
  pc.max_round_retries = retries;
  return pc;
}

}  // namespace

TEST_CASE("coordinator retries a timed-out round and discards stale replies") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.2, 0.8);
  SocketCoordinator coord(m, ProposalKernel{0.05}, stub_config(2, 250, 3), 7);

  StubLog log;
  std::thread stub([&] {
    run_stub(coord.port(), log, [](std::size_t k, const PartyMessage& msg) {
      std::vector<std::string> out;
      if (k == 0) {
        // Stay silent; the coordinator must time out and rebroadcast.
      } else if (k == 1) {
        // A stale answer to the first wire round, then the real one.
        out.push_back(contribution_frame(msg.round - 1, 1, 111.0));
        out.push_back(contribution_frame(msg.round, 1, 0.25));
      } else {
        out.push_back(contribution_frame(msg.round, 1, -0.5));
      }
      return out;
    });
  });

  RunResult result;
  std::string coord_error;
  try {
    result = coord.run();
  } catch (const std::exception& e) {
    coord_error = e.what();
  }
  coord.shutdown_sockets();
  stub.join();

  REQUIRE(coord_error.empty());
  REQUIRE(log.error.empty());
  // Chain round 1 took two wire rounds; round 2 took one.
  CHECK(log.proposals.size() == 3);
  CHECK(log.proposals[0].round + 1 == log.proposals[1].round);
  REQUIRE(result.transcript.size() == 2);
  CHECK(result.transcript[0].noisy_d == std::vector<double>{0.25});
  CHECK(result.transcript[1].noisy_d == std::vector<double>{-0.5});
  // The stale 111.0 answer was dropped, not consumed.
  CHECK(coord.accepted_contributions() == std::vector<std::uint64_t>{2});
  CHECK(log.decisions == 2);
  CHECK(log.saw_shutdown);
}

TEST_CASE("coordinator fails the round once the retry budget is exhausted") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.2, 0.8);
  SocketCoordinator coord(m, ProposalKernel{0.05}, stub_config(1, 100, 1), 7);

  StubLog log;
  std::thread stub([&] {
    run_stub(coord.port(), log, [](std::size_t, const PartyMessage&) {
      return std::vector<std::string>{};  // never answer
    });
  });

  std::string coord_error;
  try {
    coord.run();
  } catch (const ProtocolError& e) {
    coord_error = e.what();
  }
  coord.shutdown_sockets();
  stub.join();

  CHECK(coord_error.find("2 attempts") != std::string::npos);
  CHECK(log.proposals.size() == 2);  // original plus one retry
  CHECK_FALSE(log.saw_shutdown);
}

TEST_CASE("coordinator rejects contributions from unknown party ids") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.2, 0.8);
  SocketCoordinator coord(m, ProposalKernel{0.05}, stub_config(1, 2000, 0), 7);

  StubLog log;
  std::thread stub([&] {
    run_stub(coord.port(), log, [](std::size_t, const PartyMessage& msg) {
      return std::vector<std::string>{contribution_frame(msg.round, 7, 1.0)};
    });
  });

  std::string coord_error;
  try {
    coord.run();
  } catch (const ProtocolError& e) {
    coord_error = e.what();
  }
  coord.shutdown_sockets();
  stub.join();
  CHECK(coord_error.find("unknown party_id 7") != std::string::npos);
}

TEST_CASE("coordinator reports a party that drops mid-protocol") {
  const TargetModel m = penaltydp::make_beta_bernoulli(1.0, 1.0, 0.2, 0.8);
  SocketCoordinator coord(m, ProposalKernel{0.05}, stub_config(5, 2000, 0), 7);

  StubLog log;
  std::thread stub([&] {
    run_stub(coord.port(), log, [](std::size_t k, const PartyMessage& msg)
                                    -> std::vector<std::string> {
      if (k == 0) throw ProtocolError("stub walks away");
      return {contribution_frame(msg.round, 1, 0.0)};
    });
  });

  std::string coord_error;
  try {
    coord.run();
  } catch (const ProtocolError& e) {
    coord_error = e.what();
  }
  coord.shutdown_sockets();
  stub.join();
  CHECK(coord_error.find("closed mid-protocol") != std::string::npos);
}
