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

#include "kaprobe/engine.hpp"

#include <stdexcept>

#include "kaprobe/errors.hpp"

namespace kaprobe {

class Engine::SerialGuard {
 public:
  explicit SerialGuard(std::atomic<bool>& busy) : busy_(busy) {
    if (busy_.exchange(true, std::memory_order_acquire)) {
      throw std::logic_error("engine entered concurrently");
    }
  }
  ~SerialGuard() { busy_.store(false, std::memory_order_release); }
  SerialGuard(const SerialGuard&) = delete;
  SerialGuard& operator=(const SerialGuard&) = delete;

 private:
  std::atomic<bool>& busy_;
};

void SessionConfig::validate() const {
  if (t_ka <= Time::zero()) throw ConfigError("t_ka must be positive");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (n < 1) throw ConfigError("n must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (mtu_budget <= kProbeBodySize + 1) throw ConfigError("mtu_budget too small");
  if (rtt_ceiling <= Time::zero()) throw ConfigError("rtt_ceiling must be positive");
  if (recovery_responses < 1) throw ConfigError("recovery_responses must be >= 1");
  for (const auto* e : {&rtt_ewma, &owl_ewma, &rtl_ewma}) {
    if (*e && (!((*e)->tau_up_s > 0.0) || !((*e)->tau_down_s > 0.0))) {
      throw ConfigError("EWMA time constants must be positive");
    }
  }
}

MetricsConfig SessionConfig::metrics() const {
  MetricsConfig m;
  m.loss_interval = loss_interval();
  m.rtt_ceiling = rtt_ceiling;
  const double ka_s = to_seconds(t_ka);
  const double tl_s = to_seconds(loss_interval());
  m.rtt = rtt_ewma.value_or(EwmaConfig::symmetric(tau_from_alpha(alpha, ka_s)));
  m.owl = owl_ewma.value_or(EwmaConfig::symmetric(tau_from_alpha(alpha, tl_s)));
  m.rtl = rtl_ewma.value_or(EwmaConfig::symmetric(tau_from_alpha(alpha, tl_s)));
  return m;
}

Engine::Engine(Transport& transport, EventSink* sink, EngineOptions options)
    : transport_(transport), sink_(sink), options_(std::move(options)) {
  options_.server_template.role = Role::kServer;
  next_id_ = options_.first_session_id;
}

Engine::Session& Engine::get(SessionId id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw InputError("unknown session " + std::to_string(id));
  return it->second;
}

const Engine::Session& Engine::get(SessionId id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw InputError("unknown session " + std::to_string(id));
  return it->second;
}

Engine::Session& Engine::create(const SessionConfig& config, Time now) {
  config.validate();
  if (by_peer_.count(config.peer)) {
    throw InputError("peer " + config.peer.to_string() + " already has a session");
  }
  const SessionId id = next_id_++;
  const MetricsConfig mc = config.metrics();
  auto metrics = config.role == Role::kClient
                     ? std::variant<ClientSession, ServerSession>(
                           std::in_place_index<0>, mc, now)
                     : std::variant<ClientSession, ServerSession>(
                           std::in_place_index<1>, mc, now);
  auto [it, inserted] = sessions_.emplace(
      id, Session{id, config, std::move(metrics), std::nullopt, std::nullopt, 0, false, {}});
  Session& s = it->second;
  if (config.role == Role::kClient) {
    s.monitor.emplace(config.k, config.t_ka, now, config.recovery_responses);
  }
  by_peer_[config.peer] = id;
  return s;
}

SessionId Engine::add_session(const SessionConfig& config, Time now) {
  SerialGuard guard(busy_);
  Session& s = create(config, now);
  if (config.role == Role::kClient) schedule(s, now);
  return s.id;
}

bool Engine::remove_session(SessionId id) {
  SerialGuard guard(busy_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return false;
  if (it->second.pending) --pending_count_;
  by_peer_.erase(it->second.config.peer);
  sessions_.erase(it);
  return true;
}

void Engine::set_piggyback(SessionId id, bool enabled) {
  SerialGuard guard(busy_);
  get(id).config.piggyback = enabled;
}

std::optional<SessionId> Engine::find(const Address& peer) const {
  auto it = by_peer_.find(peer);
  if (it == by_peer_.end()) return std::nullopt;
  return it->second;
}

std::vector<SessionId> Engine::session_ids() const {
  std::vector<SessionId> ids;
  ids.reserve(sessions_.size());
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

const SessionConfig& Engine::config(SessionId id) const { return get(id).config; }

const ClientSession* Engine::client(SessionId id) const {
  return std::get_if<ClientSession>(&get(id).metrics);
}

const ServerSession* Engine::server(SessionId id) const {
  return std::get_if<ServerSession>(&get(id).metrics);
}

const ConnectivityMonitor* Engine::monitor(SessionId id) const {
  const auto& m = get(id).monitor;
  return m ? &*m : nullptr;
}

const SessionStats& Engine::session_stats(SessionId id) const { return get(id).stats; }

void Engine::schedule(Session& s, Time when) {
  timers_.push(Timer{when, timer_order_++, s.id, ++s.timer_generation});
}

std::optional<Time> Engine::next_deadline() {
  while (!timers_.empty()) {
    const Timer& top = timers_.top();
    auto it = sessions_.find(top.id);
    if (it != sessions_.end() && it->second.timer_generation == top.generation) {
      return top.when;
    }
    timers_.pop();
  }
  return std::nullopt;
}

void Engine::poll(Time now) {
  SerialGuard guard(busy_);
  while (!timers_.empty() && timers_.top().when <= now) {
    const Timer t = timers_.top();
    timers_.pop();
    auto it = sessions_.find(t.id);
    if (it == sessions_.end() || it->second.timer_generation != t.generation) continue;
    fire(it->second, t.when, now);
  }
}

void Engine::fire(Session& s, Time due, Time now) {
  ++stats_.deadlines_fired;
  const Time late = now - due;
  if (late > stats_.max_lateness) stats_.max_lateness = late;
  if (late * 10 > s.config.t_ka) ++stats_.deadlines_late;

  if (s.config.role == Role::kServer) {
    // Hold deadline: no reverse data showed up in time.
    if (s.pending) {
      const PendingResponse pending = *s.pending;
      set_pending(s, std::nullopt);
      send_response(s, pending, now);
    }
    return;
  }

  ++s.stats.periods;
  if (auto t = s.monitor->tick(now)) emit(s, *t);
  if (!s.config.piggyback || !s.piggybacked_this_period) send_request(s, now);
  s.piggybacked_this_period = false;

  Time next = due + s.config.t_ka;
  while (next <= now) next += s.config.t_ka;
  schedule(s, next);
}

bool Engine::transmit(const Session& s, Channel channel,
                      std::span<const std::uint8_t> bytes) {
  try {
    transport_.send(s.config.peer, channel, bytes);
    return true;
  } catch (const TransportError&) {
    ++stats_.send_errors;
    return false;
  }
}

void Engine::note_request(Session& s, Time now) {
  if (s.stats.last_request_at) {
    const Time gap = now - *s.stats.last_request_at;
    if (gap > s.stats.max_request_gap) s.stats.max_request_gap = gap;
  }
  s.stats.last_request_at = now;
}

void Engine::send_request(Session& s, Time now) {
  auto& client = std::get<ClientSession>(s.metrics);
  const ProbeBytes bytes = encode_probe(client.build_request(now));
  ++s.stats.explicit_requests;
  note_request(s, now);
  transmit(s, Channel::kProbe, bytes);
}

void Engine::send_response(Session& s, const PendingResponse& pending, Time now) {
  auto& server = std::get<ServerSession>(s.metrics);
  const ProbeBytes bytes = encode_probe(server.build_response(pending, now));
  ++s.stats.explicit_responses;
  transmit(s, Channel::kProbe, bytes);
}

void Engine::set_pending(Session& s, std::optional<PendingResponse> pending) {
  if (s.pending) --pending_count_;
  s.pending = pending;
  if (s.pending) {
    ++pending_count_;
    if (pending_count_ > stats_.max_pending_responses) {
      stats_.max_pending_responses = pending_count_;
    }
  }
}

void Engine::on_frame(const Address& from, Channel channel,
                      std::span<const std::uint8_t> bytes, Time now) {
  SerialGuard guard(busy_);
  auto found = by_peer_.find(from);
  Session* s = nullptr;
  if (found != by_peer_.end()) {
    s = &sessions_.at(found->second);
  } else if (channel == Channel::kProbe && options_.accept_unknown_peers &&
             bytes.size() == kProbeBodySize) {
    SessionConfig cfg = options_.server_template;
    cfg.peer = from;
    s = &create(cfg, now);
  } else {
    ++stats_.unknown_peer_frames;
    return;
  }

  const Direction dir = s->config.role == Role::kClient ? Direction::kServerToClient
                                                        : Direction::kClientToServer;
  FrameKind kind;
  try {
    kind = classify_frame(channel, dir, bytes);
  } catch (const Error&) {
    ++stats_.malformed_frames;
    return;
  }

  ++s->stats.frames_received;
  std::visit([](auto& m) { m.count_received(); }, s->metrics);

  switch (kind) {
    case FrameKind::kProbeRequest:
      handle_request(*s, decode_probe(bytes), now);
      break;
    case FrameKind::kProbeResponse:
      handle_response(*s, decode_probe(bytes), now);
      break;
    case FrameKind::kData:
      deliver(*s, InnerDatagram(std::vector<std::uint8_t>(bytes.begin(), bytes.end())));
      break;
    case FrameKind::kDataPiggybackedRequest:
    case FrameKind::kDataPiggybackedResponse: {
      auto extracted = extract_piggyback(
          InnerDatagram(std::vector<std::uint8_t>(bytes.begin(), bytes.end())));
      deliver(*s, extracted->first);
      if (kind == FrameKind::kDataPiggybackedRequest) {
        handle_request(*s, extracted->second, now);
      } else {
        handle_response(*s, extracted->second, now);
      }
      break;
    }
  }
}

void Engine::deliver(Session& s, const InnerDatagram& datagram) {
  ++s.stats.data_received;
  if (data_handler_) data_handler_(s.id, datagram);
}

void Engine::handle_request(Session& s, const ProbeBody& body, Time now) {
  if (s.config.role != Role::kServer) {
    ++stats_.malformed_frames;
    return;
  }
  auto& server = std::get<ServerSession>(s.metrics);
  if (s.pending) {
    // A newer request supersedes the held one; answer the old one now.
    const PendingResponse old = *s.pending;
    set_pending(s, std::nullopt);
    cancel_timer(s);
    send_response(s, old, now);
  }
  auto [samples, pending] = server.on_request(body, now);
  if (samples.rtt_ms) emit(s, Metric::kRtt, *samples.rtt_ms, server.rtt_ewma().value(), now);
  if (samples.owl_s) {
    emit(s, Metric::kOwlServer, *samples.owl_s, server.owl_ewma().value(), now);
  }
  if (s.config.piggyback) {
    set_pending(s, pending);
    schedule(s, now + s.config.t_ka);
  } else {
    send_response(s, pending, now);
  }
}

void Engine::handle_response(Session& s, const ProbeBody& body, Time now) {
  if (s.config.role != Role::kClient) {
    ++stats_.malformed_frames;
    return;
  }
  auto& client = std::get<ClientSession>(s.metrics);
  const ClientResponseSamples samples = client.on_response(body, now);
  if (samples.rtt_ms) emit(s, Metric::kRtt, *samples.rtt_ms, client.rtt_ewma().value(), now);
  if (samples.owl_c) {
    emit(s, Metric::kOwlClient, *samples.owl_c, client.owl_ewma().value(), now);
  }
  if (samples.rtl) emit(s, Metric::kRtl, *samples.rtl, client.rtl_ewma().value(), now);
  if (auto t = s.monitor->on_response(now)) emit(s, *t);
}

bool Engine::send_data(SessionId id, std::span<const std::uint8_t> payload, Time now) {
  SerialGuard guard(busy_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return false;
  Session& s = it->second;
  const InnerDatagram inner = InnerDatagram::make(payload);
  const bool fits = inner.size() + kProbeBodySize <= s.config.mtu_budget;
  ++s.stats.data_sent;

  if (s.config.piggyback && fits) {
    if (auto* client = std::get_if<ClientSession>(&s.metrics);
        client && !s.piggybacked_this_period) {
      auto frame = attach_piggyback(inner, client->build_request(now), s.config.mtu_budget);
      s.piggybacked_this_period = true;
      ++s.stats.piggybacked_requests;
      note_request(s, now);
      return transmit(s, Channel::kData, frame->bytes());
    }
    if (auto* server = std::get_if<ServerSession>(&s.metrics); server && s.pending) {
      const PendingResponse pending = *s.pending;
      set_pending(s, std::nullopt);
      cancel_timer(s);
      auto frame =
          attach_piggyback(inner, server->build_response(pending, now), s.config.mtu_budget);
      ++s.stats.piggybacked_responses;
      return transmit(s, Channel::kData, frame->bytes());
    }
  }
  std::visit([](auto& m) { m.count_data_sent(); }, s.metrics);
  return transmit(s, Channel::kData, inner.bytes());
}

void Engine::emit(const Session& s, Metric metric, double raw, double ewma, Time now) {
  if (sink_) sink_->on_measurement(MeasurementRecord{s.id, now, metric, raw, ewma});
}

void Engine::emit(const Session& s, const Transition& t) {
  if (sink_) sink_->on_status(StatusRecord{s.id, t.at, t.from, t.to});
}

}  // namespace kaprobe
