// Copyright 2026 The kaprobe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <variant>
#include <vector>

#include "kaprobe/conncheck.hpp"
#include "kaprobe/events.hpp"
#include "kaprobe/metrics.hpp"
#include "kaprobe/time.hpp"
#include "kaprobe/wire.hpp"

namespace kaprobe {

enum class Role : std::uint8_t { kClient, kServer };

struct SessionConfig {
  Role role = Role::kClient;
  Address peer;
  Time t_ka = 200ms;
  int k = 3;
  int n = 10;  // T_L = n * T_KA
  // Estimator time constants default to alpha = 0.8 against T_KA (RTT) or
  // T_L (OWL, RTL).
  double alpha = 0.8;
  std::optional<EwmaConfig> rtt_ewma;
  std::optional<EwmaConfig> owl_ewma;
  std::optional<EwmaConfig> rtl_ewma;
  // Client: piggyback requests on data. Server: hold each response up to one
  // T_KA waiting for reverse data.
  bool piggyback = false;
  std::size_t mtu_budget = 1472;
  Time rtt_ceiling = 60s;
  int recovery_responses = 1;

  // Throws ConfigError.
  void validate() const;
  Time loss_interval() const { return t_ka * n; }
  MetricsConfig metrics() const;
};

struct SessionStats {
  std::uint64_t explicit_requests = 0;
  std::uint64_t piggybacked_requests = 0;
  std::uint64_t explicit_responses = 0;
  std::uint64_t piggybacked_responses = 0;
  std::uint64_t data_sent = 0;
  std::uint64_t data_received = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t periods = 0;
  Time max_request_gap{};
  std::optional<Time> last_request_at;
};

struct EngineStats {
  std::uint64_t malformed_frames = 0;
  std::uint64_t unknown_peer_frames = 0;
  std::uint64_t send_errors = 0;
  std::uint64_t deadlines_fired = 0;
  std::uint64_t deadlines_late = 0;  // fired more than T_KA/10 after due
  Time max_lateness{};
  std::size_t max_pending_responses = 0;
};

struct EngineOptions {
  // Server behaviour: create a session for probe requests from unknown peers.
  bool accept_unknown_peers = true;
  // Engines sharing one log use disjoint id ranges.
  SessionId first_session_id = 1;
  SessionConfig server_template = [] {
    SessionConfig c;
    c.role = Role::kServer;
    return c;
  }();
};

// Single-threaded probe engine for any number of client and server sessions.
// Every entry point takes the engine-local current time; an engine must not be
// entered from two threads at once.
class Engine {
 public:
  using DataHandler = std::function<void(SessionId, const InnerDatagram&)>;

  Engine(Transport& transport, EventSink* sink = nullptr, EngineOptions options = {});
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Client sessions send their first probe at the first poll() at or after
  // `now`. Throws ConfigError, or InputError if the peer already has a session.
  SessionId add_session(const SessionConfig& config, Time now);
  bool remove_session(SessionId id);
  void set_piggyback(SessionId id, bool enabled);
  std::optional<SessionId> find(const Address& peer) const;

  std::optional<Time> next_deadline();
  void poll(Time now);
  void on_frame(const Address& from, Channel channel,
                std::span<const std::uint8_t> bytes, Time now);
  // Sends one data datagram (version 4 header + payload) on the session,
  // piggybacking a probe body when allowed. Returns false on transport error
  // or unknown session.
  bool send_data(SessionId id, std::span<const std::uint8_t> payload, Time now);

  void set_data_handler(DataHandler handler) { data_handler_ = std::move(handler); }

  std::size_t session_count() const { return sessions_.size(); }
  std::vector<SessionId> session_ids() const;
  const SessionConfig& config(SessionId id) const;
  const ClientSession* client(SessionId id) const;
  const ServerSession* server(SessionId id) const;
  const ConnectivityMonitor* monitor(SessionId id) const;
  const SessionStats& session_stats(SessionId id) const;
  const EngineStats& stats() const { return stats_; }
  // Server responses currently held for piggybacking.
  std::size_t pending_responses() const { return pending_count_; }

 private:
  struct Session {
    SessionId id = 0;
    SessionConfig config;
    std::variant<ClientSession, ServerSession> metrics;
    std::optional<ConnectivityMonitor> monitor;
    std::optional<PendingResponse> pending;
    std::uint64_t timer_generation = 0;
    bool piggybacked_this_period = false;
    SessionStats stats;
  };

  struct Timer {
    Time when;
    std::uint64_t order;
    SessionId id;
    std::uint64_t generation;
    friend bool operator>(const Timer& a, const Timer& b) {
      return a.when != b.when ? a.when > b.when : a.order > b.order;
    }
  };

  class SerialGuard;

  Session& get(SessionId id);
  const Session& get(SessionId id) const;
  Session& create(const SessionConfig& config, Time now);
  void schedule(Session& s, Time when);
  void cancel_timer(Session& s) { ++s.timer_generation; }
  void fire(Session& s, Time due, Time now);

  void send_request(Session& s, Time now);
  void send_response(Session& s, const PendingResponse& pending, Time now);
  void handle_request(Session& s, const ProbeBody& body, Time now);
  void handle_response(Session& s, const ProbeBody& body, Time now);
  void deliver(Session& s, const InnerDatagram& datagram);
  void note_request(Session& s, Time now);
  bool transmit(const Session& s, Channel channel, std::span<const std::uint8_t> bytes);
  void emit(const Session& s, Metric metric, double raw, double ewma, Time now);
  void emit(const Session& s, const Transition& t);
  void set_pending(Session& s, std::optional<PendingResponse> pending);

  Transport& transport_;
  EventSink* sink_;
  EngineOptions options_;
  DataHandler data_handler_;
  std::map<SessionId, Session> sessions_;
  std::map<Address, SessionId> by_peer_;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
  SessionId next_id_ = 1;
  std::uint64_t timer_order_ = 0;
  std::size_t pending_count_ = 0;
  EngineStats stats_;
  std::atomic<bool> busy_{false};
};

}  // namespace kaprobe
