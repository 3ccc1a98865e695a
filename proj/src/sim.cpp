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

#include "kaprobe/sim.hpp"

#include "kaprobe/errors.hpp"

namespace kaprobe {

class SimNetwork::NodeTransport final : public Transport {
 public:
  NodeTransport(SimNetwork& net, Address self) : net_(net), self_(self) {}
  void send(const Address& to, Channel channel,
            std::span<const std::uint8_t> bytes) override {
    net_.route(self_, to, channel, bytes);
  }

 private:
  SimNetwork& net_;
  Address self_;
};

SimNetwork::SimNetwork(Time start) : now_(start) {}

// Engines go before their transports.
SimNetwork::~SimNetwork() {
  for (auto& [addr, n] : nodes_) n.engine.reset();
}

Engine& SimNetwork::add_engine(const Address& address, EngineOptions options,
                               EventSink* sink, Time clock_offset) {
  if (nodes_.count(address)) throw InputError("duplicate node " + address.to_string());
  Node n;
  n.address = address;
  n.offset = clock_offset;
  n.transport = std::make_unique<NodeTransport>(*this, address);
  n.engine = std::make_unique<Engine>(*n.transport, sink, std::move(options));
  auto [it, _] = nodes_.emplace(address, std::move(n));
  return *it->second.engine;
}

SimNetwork::Node& SimNetwork::node(const Address& address) {
  auto it = nodes_.find(address);
  if (it == nodes_.end()) throw InputError("unknown node " + address.to_string());
  return it->second;
}

const SimNetwork::Node& SimNetwork::node(const Address& address) const {
  auto it = nodes_.find(address);
  if (it == nodes_.end()) throw InputError("unknown node " + address.to_string());
  return it->second;
}

Engine& SimNetwork::engine(const Address& address) { return *node(address).engine; }

Time SimNetwork::local_time(const Address& address) const {
  return now_ + node(address).offset;
}

void SimNetwork::connect(const Address& client, const Address& server,
                         ImpairmentProfile profile, std::unique_ptr<LossModel> loss) {
  node(client);
  node(server);
  auto key = std::make_pair(client, server);
  if (links_.count(key) || links_.count({server, client})) {
    throw InputError("link already exists");
  }
  links_.emplace(key, Link{client, server,
                           std::make_unique<LinkEmulator>(std::move(profile), now_,
                                                          std::move(loss))});
}

LinkEmulator& SimNetwork::link(const Address& client, const Address& server) {
  auto it = links_.find({client, server});
  if (it == links_.end()) throw InputError("no such link");
  return *it->second.emulator;
}

SessionId SimNetwork::add_client(const Address& client, const Address& server,
                                 SessionConfig config) {
  config.role = Role::kClient;
  config.peer = server;
  return engine(client).add_session(config, local_time(client));
}

void SimNetwork::push(Time at, int rank, Action action) {
  events_.push(Event{at, rank, order_++, std::move(action)});
}

void SimNetwork::schedule(Time at, Action action) { push(at, 1, std::move(action)); }

void SimNetwork::route(const Address& from, const Address& to, Channel channel,
                       std::span<const std::uint8_t> bytes) {
  Link* link = nullptr;
  Direction dir = Direction::kClientToServer;
  if (auto it = links_.find({from, to}); it != links_.end()) {
    link = &it->second;
  } else if (auto rit = links_.find({to, from}); rit != links_.end()) {
    link = &rit->second;
    dir = Direction::kServerToClient;
  } else {
    throw TransportError("no route " + from.to_string() + " -> " + to.to_string());
  }
  if (!nodes_.count(to)) throw TransportError("no node " + to.to_string());
  const std::optional<Time> at = link->emulator->transmit(dir, now_);
  if (trace_) {
    TraceEvent ev{now_, from, to, channel, dir, FrameKind::kData, bytes, at};
    try {
      ev.kind = classify_frame(channel, dir, bytes);
    } catch (const Error&) {
    }
    trace_(ev);
  }
  if (!at) return;
  std::vector<std::uint8_t> frame(bytes.begin(), bytes.end());
  push(*at, 0, [this, from, to, channel, frame = std::move(frame)](Time t) {
    Node& n = node(to);
    n.engine->on_frame(from, channel, frame, t + n.offset);
  });
}

std::optional<std::pair<Time, SimNetwork::Node*>> SimNetwork::next_timer() {
  std::optional<std::pair<Time, Node*>> best;
  for (auto& [addr, n] : nodes_) {
    if (auto d = n.engine->next_deadline()) {
      const Time global = *d - n.offset;
      if (!best || global < best->first) best = std::make_pair(global, &n);
    }
  }
  return best;
}

bool SimNetwork::step() {
  auto timer = next_timer();
  const bool have_event = !events_.empty();
  if (!timer && !have_event) return false;
  if (have_event && (!timer || events_.top().at <= timer->first)) {
    Event ev = events_.top();
    events_.pop();
    if (ev.at > now_) now_ = ev.at;
    ev.action(now_);
    return true;
  }
  if (timer->first > now_) now_ = timer->first;
  timer->second->engine->poll(now_ + timer->second->offset);
  return true;
}

std::optional<Time> SimNetwork::next_event_time() {
  auto timer = next_timer();
  std::optional<Time> next;
  if (!events_.empty()) next = events_.top().at;
  if (timer && (!next || timer->first < *next)) next = timer->first;
  return next;
}

void SimNetwork::run_until(Time until) {
  for (;;) {
    const auto next = next_event_time();
    if (!next || *next > until) break;
    step();
  }
  if (until > now_) now_ = until;
}

}  // namespace kaprobe
