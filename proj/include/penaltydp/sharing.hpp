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

#ifndef PENALTYDP_SHARING_HPP_
#define PENALTYDP_SHARING_HPP_

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "penaltydp/errors.hpp"
#include "penaltydp/jsonio.hpp"
#include "penaltydp/model.hpp"
#include "penaltydp/rng.hpp"
#include "penaltydp/sampler.hpp"

// Multi-party penalty sampling over a star topology. The coordinator runs
// the chain; each party holds a contiguous shard of the records and answers
// every proposal with its noisy share of the log-likelihood difference.
// Summing the N shares, each carrying independent N(0, sigma^2) noise, gives
// a total with variance N * sigma^2, and the acceptance penalty uses exactly
// that, so the protocol with one party is bit-identical to the single-owner
// penalty sampler run on the full dataset.
//
// Two transports are provided. "in_process" calls the parties directly and
// is the reference for equality tests. "socket" speaks newline-delimited
// JSON frames over local TCP. A round that does not complete within the
// timeout is retried under a fresh wire round id; contributions tagged with
// an older id are discarded as stale.

namespace penaltydp {

// ---------------------------------------------------------------------------
// Partitioning

struct Shard {
  std::uint32_t party_id = 0;  // 1-based
  std::size_t offset = 0;      // index of the first record in the full dataset
  Dataset data;
};

// Contiguous, near-equal split; the first (n mod N) shards get the extra
// record. Every shard must end up nonempty.
inline std::vector<Shard> split_dataset(const Dataset& full, std::uint32_t num_parties) {
  if (num_parties < 1) throw ConfigError("split_dataset: need at least one party");
  const std::size_t n = full.size();
  if (n < num_parties) {
    throw ConfigError("split_dataset: fewer records than parties");
  }
  const std::size_t base = n / num_parties;
  const std::size_t rem = n % num_parties;
  std::vector<Shard> shards;
  shards.reserve(num_parties);
  std::size_t pos = 0;
  for (std::uint32_t i = 0; i < num_parties; ++i) {
    const std::size_t take = base + (i < rem ? 1 : 0);
    Shard s;
    s.party_id = i + 1;
    s.offset = pos;
    s.data.records.assign(full.records.begin() + static_cast<std::ptrdiff_t>(pos),
                          full.records.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;
    shards.push_back(std::move(s));
  }
  return shards;
}

// Checks that the shards tile a single dataset: ids are exactly 1..N and the
// offsets, sorted, are contiguous starting at zero.
inline void validate_partition(const std::vector<Shard>& shards) {
  if (shards.empty()) throw ConfigError("partition has no shards");
  const std::size_t n_parties = shards.size();
  std::vector<const Shard*> by_offset;
  by_offset.reserve(n_parties);
  std::vector<bool> seen(n_parties, false);
  for (const Shard& s : shards) {
    if (s.party_id < 1 || s.party_id > n_parties) {
      throw ConfigError("partition: party_id " + std::to_string(s.party_id) +
                        " outside 1.." + std::to_string(n_parties));
    }
    if (seen[s.party_id - 1]) {
      throw ConfigError("partition: duplicate party_id " + std::to_string(s.party_id));
    }
    seen[s.party_id - 1] = true;
    if (s.data.records.empty()) {
      throw ConfigError("partition: party " + std::to_string(s.party_id) +
                        " holds no records");
    }
    by_offset.push_back(&s);
  }
  std::sort(by_offset.begin(), by_offset.end(),
            [](const Shard* a, const Shard* b) { return a->offset < b->offset; });
  std::size_t expect = 0;
  for (const Shard* s : by_offset) {
    if (s->offset != expect) {
      throw ConfigError("partition: gap or overlap at offset " + std::to_string(s->offset) +
                        ", expected " + std::to_string(expect));
    }
    expect += s->data.size();
  }
}

// ---------------------------------------------------------------------------
// Wire format

enum class MessageKind { kProposal, kContribution, kDecision, kShutdown };

inline const char* message_kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::kProposal: return "PROPOSAL";
    case MessageKind::kContribution: return "CONTRIBUTION";
    case MessageKind::kDecision: return "DECISION";
    case MessageKind::kShutdown: return "SHUTDOWN";
  }
  return "?";
}

struct PartyMessage {
  MessageKind kind = MessageKind::kShutdown;
  std::uint64_t round = 0;      // wire round id, fresh per broadcast
  Vec theta;                    // proposal only: current state
  Vec theta_prime;              // proposal only: proposed point (not clamped)
  std::uint32_t party_id = 0;   // contribution only
  double noisy_d = 0.0;         // contribution only
  bool accepted = false;        // decision only
};

// One frame per line; the transport appends the newline.
inline std::string encode_message(const PartyMessage& m) {
  JsonObject o;
  o.field("round", static_cast<std::uint64_t>(m.round));
  o.field("kind", message_kind_name(m.kind));
  switch (m.kind) {
    case MessageKind::kProposal:
      o.field("theta", m.theta);
      o.field("theta_prime", m.theta_prime);
      break;
    case MessageKind::kContribution:
      o.field("party_id", static_cast<std::uint64_t>(m.party_id));
      o.field("noisy_d", m.noisy_d);
      break;
    case MessageKind::kDecision:
      o.field("accepted", m.accepted);
      break;
    case MessageKind::kShutdown:
      break;
  }
  return o.str();
}

namespace detail_wire {

inline const nlohmann::json& require_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) {
    throw DecodeError(std::string("missing field '") + name + "'", 0);
  }
  return *it;
}

inline double number_field(const nlohmann::json& j, const char* name) {
  const auto& f = require_field(j, name);
  if (!f.is_number()) {
    throw DecodeError(std::string("field '") + name + "' must be a number", 0);
  }
  const double v = f.get<double>();
  if (!std::isfinite(v)) {
    throw DecodeError(std::string("field '") + name + "' must be finite", 0);
  }
  return v;
}

inline Vec vector_field(const nlohmann::json& j, const char* name) {
  const auto& f = require_field(j, name);
  if (!f.is_array() || f.empty()) {
    throw DecodeError(std::string("field '") + name + "' must be a nonempty array", 0);
  }
  Vec out;
  out.reserve(f.size());
  for (const auto& el : f) {
    if (!el.is_number()) {
      throw DecodeError(std::string("field '") + name + "' must contain numbers only", 0);
    }
    const double v = el.get<double>();
    if (!std::isfinite(v)) {
      throw DecodeError(std::string("field '") + name + "' must contain finite numbers", 0);
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace detail_wire

// Parses and validates one frame. Unknown extra fields are ignored; missing
// or mistyped ones raise DecodeError naming the field. A syntactically
// broken frame reports the byte offset where parsing stopped.
inline PartyMessage decode_message(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DecodeError("malformed frame", e.byte);
  }
  if (!j.is_object()) throw DecodeError("frame must be a JSON object", 0);

  PartyMessage m;
  const auto& round = detail_wire::require_field(j, "round");
  if (!round.is_number_unsigned()) {
    throw DecodeError("field 'round' must be a non-negative integer", 0);
  }
  m.round = round.get<std::uint64_t>();

  const auto& kind = detail_wire::require_field(j, "kind");
  if (!kind.is_string()) throw DecodeError("field 'kind' must be a string", 0);
  const std::string ks = kind.get<std::string>();
  if (ks == "PROPOSAL") {
    m.kind = MessageKind::kProposal;
    m.theta = detail_wire::vector_field(j, "theta");
    m.theta_prime = detail_wire::vector_field(j, "theta_prime");
    if (m.theta.size() != m.theta_prime.size()) {
      throw DecodeError("fields 'theta' and 'theta_prime' must have equal length", 0);
    }
  } else if (ks == "CONTRIBUTION") {
    m.kind = MessageKind::kContribution;
    const auto& pid = detail_wire::require_field(j, "party_id");
    if (!pid.is_number_unsigned() || pid.get<std::uint64_t>() < 1) {
      throw DecodeError("field 'party_id' must be a positive integer", 0);
    }
    m.party_id = static_cast<std::uint32_t>(pid.get<std::uint64_t>());
    m.noisy_d = detail_wire::number_field(j, "noisy_d");
  } else if (ks == "DECISION") {
    m.kind = MessageKind::kDecision;
    const auto& acc = detail_wire::require_field(j, "accepted");
    if (!acc.is_boolean()) throw DecodeError("field 'accepted' must be a boolean", 0);
    m.accepted = acc.get<bool>();
  } else if (ks == "SHUTDOWN") {
    m.kind = MessageKind::kShutdown;
  } else {
    throw DecodeError("field 'kind' has unknown value '" + ks + "'", 0);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Party

// Holds one shard and a private noise stream. Each call evaluates the local
// log-likelihood difference at the proposal clamped into the box (the same
// rule the single-owner sampler applies) and adds one N(0, sigma^2) draw.
class Party {
 public:
  Party(const TargetModel& model, Shard shard, double sigma, std::uint64_t seed)
      : model_(&model),
        shard_(std::move(shard)),
        sigma_(sigma),
        noise_(seed, streams::party_noise(shard_.party_id)) {
    if (!(sigma > 0.0 && std::isfinite(sigma))) {
      throw ConfigError("party noise sigma must be > 0");
    }
  }

  double contribution(const Vec& theta, const Vec& theta_prime) {
    ++invocations_;
    const Vec theta_eval = model_->param_box.clamp(theta_prime);
    const double d = log_lik_diff(*model_, shard_.data, theta, theta_eval);
    return d + sigma_ * noise_.normal();
  }

  std::uint32_t id() const { return shard_.party_id; }
  std::size_t n_records() const { return shard_.data.size(); }
  std::uint64_t invocations() const { return invocations_; }
  double sigma() const { return sigma_; }

 private:
  const TargetModel* model_;
  Shard shard_;
  double sigma_;
  RngStream noise_;
  std::uint64_t invocations_ = 0;
};

// ---------------------------------------------------------------------------
// Protocol configuration and result

struct ProtocolConfig {
  std::uint32_t num_parties = 0;
  double sigma = 0.0;            // per-party noise level
  std::uint64_t rounds = 0;      // chain iterations
  std::string transport = "in_process";  // or "socket"
  std::uint64_t burn_in = 0;
  std::uint64_t thin = 1;
  int timeout_ms = 5000;         // per collection attempt (socket transport)
  int max_round_retries = 3;
  std::uint16_t port = 0;        // 0 picks an ephemeral port
};

inline void validate_protocol_config(const ProtocolConfig& cfg) {
  if (cfg.num_parties < 1) throw ConfigError("num_parties must be >= 1");
  if (cfg.transport != "in_process" && cfg.transport != "socket") {
    throw ConfigError("transport must be 'in_process' or 'socket'");
  }
  if (cfg.timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
  if (cfg.max_round_retries < 0) throw ConfigError("max_round_retries must be >= 0");
  PenaltyConfig chain{cfg.sigma, cfg.rounds, cfg.burn_in, cfg.thin};
  validate_config(chain, SamplerMode::kPenalty);
}

struct PartyReport {
  std::uint32_t party_id = 0;
  std::size_t n_records = 0;
  std::uint64_t invocations = 0;
  double sigma = 0.0;
};

struct ProtocolResult {
  RunResult run;
  std::vector<PartyReport> parties;
};

// ---------------------------------------------------------------------------
// Coordinator core (transport-independent)

namespace detail_proto {

// One chain step given a function that gathers the per-party noisy shares
// for a fixed proposal. The gather callback returns contributions indexed by
// party id (1-based order), already canonicalised. After every accept/reject
// the notify callback sees the finished transcript entry, which lets a
// transport announce the decision.
template <typename GatherFn, typename NotifyFn>
RunResult drive_chain(const TargetModel& model, const ProposalKernel& kernel,
                      const ProtocolConfig& cfg, std::uint64_t seed, GatherFn&& gather,
                      NotifyFn&& notify) {
  ChainState state{model.param_box.center(), 0};
  RngStream proposal_rng(seed, streams::kProposal);
  RngStream accept_rng(seed, streams::kAccept);
  PenaltyConfig chain{cfg.sigma, cfg.rounds, cfg.burn_in, cfg.thin};
  SampleCollector collector(chain, state.theta.size());
  Transcript transcript;
  transcript.reserve(cfg.rounds);
  const double sigma2_total =
      static_cast<double>(cfg.num_parties) * cfg.sigma * cfg.sigma;

  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t t = 0; t < cfg.rounds; ++t) {
    auto c = detail::begin_step(model, state, kernel, proposal_rng);
    std::vector<double> shares = gather(state.theta, c.theta_proposed);
    double total = 0.0;
    for (double v : shares) total += v;
    TranscriptEntry e = detail::finish_step(state, std::move(c), std::move(shares), {},
                                            total, sigma2_total, accept_rng);
    notify(e);
    collector.observe(state.iter, state.theta, e.accepted);
    transcript.push_back(std::move(e));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return collector.finalize(std::move(transcript), secs);
}

template <typename GatherFn>
RunResult drive_chain(const TargetModel& model, const ProposalKernel& kernel,
                      const ProtocolConfig& cfg, std::uint64_t seed, GatherFn&& gather) {
  return drive_chain(model, kernel, cfg, seed, std::forward<GatherFn>(gather),
                     [](const TranscriptEntry&) {});
}

}  // namespace detail_proto

// ---------------------------------------------------------------------------
// Socket plumbing

namespace detail_net {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = o.fd_;
      o.fd_ = -1;
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

inline std::string errno_text() { return std::strerror(errno); }

// The protocol interleaves small writes with reads in both directions, a
// pattern Nagle's algorithm turns into 40 ms delayed-ACK stalls per round.
inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

inline Fd make_listener(std::uint16_t& port) {
  Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
  if (!fd.valid()) throw ProtocolError("socket(): " + errno_text());
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw ProtocolError("bind(127.0.0.1:" + std::to_string(port) + "): " + errno_text());
  }
  if (::listen(fd.get(), 64) != 0) throw ProtocolError("listen(): " + errno_text());
  socklen_t len = sizeof(addr);
  if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw ProtocolError("getsockname(): " + errno_text());
  }
  port = ntohs(addr.sin_port);
  return fd;
}

// Connects to the loopback coordinator, retrying briefly so a party thread
// may start before the listener is accepting.
inline Fd connect_local(std::uint16_t port) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd.valid()) throw ProtocolError("socket(): " + errno_text());
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      set_nodelay(fd.get());
      return fd;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  throw ProtocolError("connect(127.0.0.1:" + std::to_string(port) + "): " + errno_text());
}

inline void send_line(int fd, const std::string& frame) {
  std::string wire = frame;
  wire += '\n';
  std::size_t sent = 0;
  while (sent < wire.size()) {
    // MSG_NOSIGNAL turns a dead peer into an error instead of SIGPIPE.
    const ssize_t k = ::send(fd, wire.data() + sent, wire.size() - sent, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("send(): " + errno_text());
    }
    sent += static_cast<std::size_t>(k);
  }
}

// Per-connection receive buffer that splits the byte stream into lines.
class LineReader {
 public:
  // One read() call; assumes the fd was reported readable. Returns false on
  // a clean EOF.
  bool fill(int fd) {
    char chunk[4096];
    for (;;) {
      const ssize_t k = ::read(fd, chunk, sizeof(chunk));
      if (k < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError("read(): " + errno_text());
      }
      if (k == 0) return false;
      buf_.append(chunk, static_cast<std::size_t>(k));
      if (buf_.size() > kMaxBuffer) throw ProtocolError("frame exceeds 16 MiB");
      return true;
    }
  }

  std::optional<std::string> pop_line() {
    const auto nl = buf_.find('\n');
    if (nl == std::string::npos) return std::nullopt;
    std::string line = buf_.substr(0, nl);
    buf_.erase(0, nl + 1);
    return line;
  }

 private:
  static constexpr std::size_t kMaxBuffer = 16u << 20;
  std::string buf_;
};

// Blocking line read with optional timeout; nullopt means EOF.
inline std::optional<std::string> read_line_blocking(int fd, LineReader& reader,
                                                     int timeout_ms) {
  for (;;) {
    if (auto line = reader.pop_line()) return line;
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("poll(): " + errno_text());
    }
    if (rc == 0) throw ProtocolError("timed out waiting for a frame");
    if (!reader.fill(fd)) return std::nullopt;
  }
}

}  // namespace detail_net

// ---------------------------------------------------------------------------
// Socket party client

// Runs one party against a coordinator until it sends a shutdown frame.
// Answers every proposal it reads, including retried ones, so its noise
// stream advances exactly once per proposal received.
inline void run_party_socket(const std::string& host, std::uint16_t port, Party& party) {
  if (host != "127.0.0.1" && host != "localhost") {
    throw ConfigError("socket transport is loopback-only");
  }
  detail_net::Fd fd = detail_net::connect_local(port);
  detail_net::LineReader reader;
  for (;;) {
    auto line = detail_net::read_line_blocking(fd.get(), reader, -1);
    if (!line) throw ProtocolError("coordinator closed the connection before shutdown");
    const PartyMessage m = decode_message(*line);
    switch (m.kind) {
      case MessageKind::kProposal: {
        PartyMessage reply;
        reply.kind = MessageKind::kContribution;
        reply.round = m.round;
        reply.party_id = party.id();
        reply.noisy_d = party.contribution(m.theta, m.theta_prime);
        detail_net::send_line(fd.get(), encode_message(reply));
        break;
      }
      case MessageKind::kDecision:
        break;  // informational
      case MessageKind::kShutdown:
        return;
      case MessageKind::kContribution:
        throw ProtocolError("party received a contribution frame");
    }
  }
}

// ---------------------------------------------------------------------------
// Socket coordinator

// Owns the listening socket from construction so the port is known before
// any party starts. run() accepts the connections, drives the chain, and
// shuts the parties down.
class SocketCoordinator {
 public:
  SocketCoordinator(const TargetModel& model, const ProposalKernel& kernel,
                    const ProtocolConfig& cfg, std::uint64_t seed)
      : model_(&model), kernel_(kernel), cfg_(cfg), seed_(seed), port_(cfg.port) {
    validate_protocol_config(cfg_);
    listener_ = detail_net::make_listener(port_);
  }

  std::uint16_t port() const { return port_; }

  // Closes the listener and every party connection. Parties blocked on a
  // read see EOF, which lets their threads be joined after a failure.
  void shutdown_sockets() {
    conns_.clear();
    listener_.reset();
  }

  // Contributions the coordinator actually consumed, indexed by party id
  // (0-based); retries answered late and then discarded are not counted.
  const std::vector<std::uint64_t>& accepted_contributions() const { return accepted_; }

  RunResult run() {
    accept_parties();
    RunResult result = detail_proto::drive_chain(
        *model_, kernel_, cfg_, seed_,
        [this](const Vec& theta, const Vec& theta_prime) {
          return gather(theta, theta_prime);
        },
        [this](const TranscriptEntry& e) {
          PartyMessage verdict;
          verdict.kind = MessageKind::kDecision;
          verdict.round = wire_round_;
          verdict.accepted = e.accepted;
          broadcast(encode_message(verdict));
        });
    PartyMessage bye;
    bye.kind = MessageKind::kShutdown;
    bye.round = wire_round_;
    broadcast(encode_message(bye));
    return result;
  }

 private:
  void accept_parties() {
    accepted_.assign(cfg_.num_parties, 0);
    for (std::uint32_t i = 0; i < cfg_.num_parties; ++i) {
      pollfd p{listener_.get(), POLLIN, 0};
      const int rc = ::poll(&p, 1, cfg_.timeout_ms);
      if (rc < 0) throw ProtocolError("poll(listener): " + detail_net::errno_text());
      if (rc == 0) {
        throw ProtocolError("timed out waiting for party connections (" +
                            std::to_string(i) + "/" +
                            std::to_string(cfg_.num_parties) + " connected)");
      }
      const int fd = ::accept(listener_.get(), nullptr, nullptr);
      if (fd < 0) throw ProtocolError("accept(): " + detail_net::errno_text());
      detail_net::set_nodelay(fd);
      conns_.emplace_back(fd);
    }
    readers_.resize(conns_.size());
  }

  void broadcast(const std::string& frame) {
    for (auto& c : conns_) detail_net::send_line(c.get(), frame);
  }

  // Broadcasts the proposal and collects one contribution per party,
  // retrying under a fresh wire round id when the timeout lapses.
  std::vector<double> gather(const Vec& theta, const Vec& theta_prime) {
    const std::uint32_t n = cfg_.num_parties;
    for (int attempt = 0; attempt <= cfg_.max_round_retries; ++attempt) {
      ++wire_round_;
      PartyMessage prop;
      prop.kind = MessageKind::kProposal;
      prop.round = wire_round_;
      prop.theta = theta;
      prop.theta_prime = theta_prime;
      broadcast(encode_message(prop));

      std::vector<double> shares(n, 0.0);
      std::vector<bool> have(n, false);
      std::uint32_t got = 0;
      const auto deadline = std::chrono::steady_clock::now() +
                            std::chrono::milliseconds(cfg_.timeout_ms);
      while (got < n) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) break;
        const int remaining = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() +
            1);
        std::vector<pollfd> pfds;
        pfds.reserve(conns_.size());
        for (auto& c : conns_) pfds.push_back({c.get(), POLLIN, 0});
        const int rc = ::poll(pfds.data(), pfds.size(), remaining);
        if (rc < 0) {
          if (errno == EINTR) continue;
          throw ProtocolError("poll(): " + detail_net::errno_text());
        }
        if (rc == 0) break;
        for (std::size_t i = 0; i < pfds.size(); ++i) {
          if (!(pfds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
          if (!readers_[i].fill(conns_[i].get())) {
            throw ProtocolError("party connection closed mid-protocol");
          }
          while (auto line = readers_[i].pop_line()) {
            const PartyMessage m = decode_message(*line);
            if (m.kind != MessageKind::kContribution) {
              throw ProtocolError("coordinator expected a contribution frame, got " +
                                  std::string(message_kind_name(m.kind)));
            }
            if (m.round != wire_round_) continue;  // stale, discard
            if (m.party_id < 1 || m.party_id > n) {
              throw ProtocolError("contribution from unknown party_id " +
                                  std::to_string(m.party_id));
            }
            if (have[m.party_id - 1]) continue;  // duplicate, keep the first
            have[m.party_id - 1] = true;
            shares[m.party_id - 1] = m.noisy_d;
            ++accepted_[m.party_id - 1];
            ++got;
          }
        }
      }
      if (got == n) return shares;
    }
    throw ProtocolError("round incomplete after " +
                        std::to_string(cfg_.max_round_retries + 1) + " attempts");
  }

  const TargetModel* model_;
  ProposalKernel kernel_;
  ProtocolConfig cfg_;
  std::uint64_t seed_;
  std::uint16_t port_;
  detail_net::Fd listener_;
  std::vector<detail_net::Fd> conns_;
  std::vector<detail_net::LineReader> readers_;
  std::vector<std::uint64_t> accepted_;
  std::uint64_t wire_round_ = 0;
};

// ---------------------------------------------------------------------------
// Entry point

inline ProtocolResult run_protocol(const TargetModel& model,
                                   const std::vector<Shard>& shards,
                                   const ProposalKernel& kernel, const ProtocolConfig& cfg,
                                   std::uint64_t seed) {
  validate_protocol_config(cfg);
  if (shards.size() != cfg.num_parties) {
    throw ConfigError("num_parties does not match the shard count");
  }
  validate_partition(shards);

  std::vector<Shard> ordered = shards;
  std::sort(ordered.begin(), ordered.end(),
            [](const Shard& a, const Shard& b) { return a.party_id < b.party_id; });
  std::vector<Party> parties;
  parties.reserve(ordered.size());
  for (Shard& s : ordered) parties.emplace_back(model, std::move(s), cfg.sigma, seed);

  ProtocolResult out;
  if (cfg.transport == "in_process") {
    out.run = detail_proto::drive_chain(
        model, kernel, cfg, seed, [&parties](const Vec& theta, const Vec& theta_prime) {
          std::vector<double> shares;
          shares.reserve(parties.size());
          for (Party& p : parties) shares.push_back(p.contribution(theta, theta_prime));
          return shares;
        });
  } else {
    SocketCoordinator coord(model, kernel, cfg, seed);
    const std::uint16_t port = coord.port();
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(parties.size());
    threads.reserve(parties.size());
    for (std::size_t i = 0; i < parties.size(); ++i) {
      threads.emplace_back([&, i] {
        try {
          run_party_socket("127.0.0.1", port, parties[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    std::exception_ptr coord_error;
    try {
      out.run = coord.run();
    } catch (...) {
      coord_error = std::current_exception();
    }
    coord.shutdown_sockets();
    for (auto& t : threads) t.join();
    if (coord_error) std::rethrow_exception(coord_error);
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  out.parties.reserve(parties.size());
  for (const Party& p : parties) {
    out.parties.push_back({p.id(), p.n_records(), p.invocations(), p.sigma()});
  }
  return out;
}

}  // namespace penaltydp

#endif  // PENALTYDP_SHARING_HPP_
