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

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

#include "kaprobe/emulator.hpp"
#include "kaprobe/engine.hpp"

namespace kaprobe {

struct TraceEvent {
  Time time{};
  Address from;
  Address to;
  Channel channel = Channel::kProbe;
  Direction direction = Direction::kClientToServer;
  FrameKind kind = FrameKind::kData;
  std::span<const std::uint8_t> bytes;  // valid during the hook call only
  std::optional<Time> deliver_at;       // nullopt: dropped
};

// Discrete-event network of engines joined by emulated links. All times are
// virtual; an engine sees global time plus its clock offset.
class SimNetwork {
 public:
  using Action = std::function<void(Time)>;
  using TraceHook = std::function<void(const TraceEvent&)>;

  explicit SimNetwork(Time start = Time::zero());
  ~SimNetwork();
  SimNetwork(const SimNetwork&) = delete;
  SimNetwork& operator=(const SimNetwork&) = delete;

  Engine& add_engine(const Address& address, EngineOptions options = {},
                     EventSink* sink = nullptr, Time clock_offset = Time::zero());
  Engine& engine(const Address& address);

  // Joins a client and a server node. Profile time zero is the current time.
  void connect(const Address& client, const Address& server, ImpairmentProfile profile,
               std::unique_ptr<LossModel> loss = nullptr);
  LinkEmulator& link(const Address& client, const Address& server);

  // Client session on `client` probing `server`.
  SessionId add_client(const Address& client, const Address& server, SessionConfig config);

  void schedule(Time at, Action action);
  void set_trace(TraceHook hook) { trace_ = std::move(hook); }

  Time now() const { return now_; }
  // Processes every event due at or before `until`, then sets now() = until.
  void run_until(Time until);
  // Processes the next event. Returns false when nothing is pending.
  bool step();
  std::optional<Time> next_event_time();

  // Local clock of the node.
  Time local_time(const Address& address) const;

 private:
  class NodeTransport;
  struct Node {
    Address address;
    Time offset{};
    std::unique_ptr<NodeTransport> transport;
    std::unique_ptr<Engine> engine;
  };
  struct Link {
    Address client;
    Address server;
    std::unique_ptr<LinkEmulator> emulator;
  };
  struct Event {
    Time at;
    int rank;  // deliveries before actions before timers
    std::uint64_t order;
    Action action;
    friend bool operator>(const Event& a, const Event& b) {
      if (a.at != b.at) return a.at > b.at;
      if (a.rank != b.rank) return a.rank > b.rank;
      return a.order > b.order;
    }
  };

  void route(const Address& from, const Address& to, Channel channel,
             std::span<const std::uint8_t> bytes);
  void push(Time at, int rank, Action action);
  std::optional<std::pair<Time, Node*>> next_timer();
  Node& node(const Address& address);
  const Node& node(const Address& address) const;

  std::map<Address, Node> nodes_;
  std::map<std::pair<Address, Address>, Link> links_;  // keyed by (client, server)
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t order_ = 0;
  Time now_{};
  TraceHook trace_;
};

}  // namespace kaprobe
