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

#include "kaprobe/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <thread>
#include <vector>

#include "kaprobe/engine.hpp"
#include "kaprobe/errors.hpp"
#include "kaprobe/udp.hpp"

namespace kaprobe {
namespace {

struct Frame {
  Address from;
  Address to;
  Channel channel;
  std::vector<std::uint8_t> bytes;
};

class QueueTransport final : public Transport {
 public:
  QueueTransport(Address self, std::deque<Frame>& queue) : self_(self), queue_(queue) {}
  void send(const Address& to, Channel channel, std::span<const std::uint8_t> bytes) override {
    queue_.push_back(Frame{self_, to, channel, {bytes.begin(), bytes.end()}});
  }

 private:
  Address self_;
  std::deque<Frame>& queue_;
};

class NullTransport final : public Transport {
 public:
  void send(const Address&, Channel, std::span<const std::uint8_t>) override { ++sent; }
  std::uint64_t sent = 0;
};

LatencySummary summarize(std::vector<double>& us) {
  LatencySummary s;
  if (us.empty()) return s;
  std::sort(us.begin(), us.end());
  auto at = [&](double q) {
    const auto i = static_cast<std::size_t>(q * static_cast<double>(us.size() - 1));
    return us[i];
  };
  s.p50_us = at(0.5);
  s.p99_us = at(0.99);
  s.max_us = us.back();
  return s;
}

double elapsed_us(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

void paced(const BenchOptions& o, BenchReport& r) {
  const Address server_addr{0x0a000001u, 5000};
  std::deque<Frame> queue;
  QueueTransport server_tx(server_addr, queue);
  EngineOptions server_opts;
  server_opts.server_template.t_ka = from_millis(o.t_ka_ms);
  server_opts.first_session_id = 1000001;
  Engine server(server_tx, nullptr, server_opts);

  // One engine per client address keeps peers distinct on the server.
  struct Client {
    Address address;
    std::unique_ptr<QueueTransport> tx;
    std::unique_ptr<Engine> engine;
  };
  std::vector<Client> clients;
  clients.reserve(o.sessions);
  const Time t_ka = from_millis(o.t_ka_ms);
  SessionConfig cfg;
  cfg.t_ka = t_ka;
  cfg.peer = server_addr;
  EngineOptions client_opts;
  client_opts.accept_unknown_peers = false;
  for (std::size_t i = 0; i < o.sessions; ++i) {
    Client c;
    c.address = Address{0x0b000000u + static_cast<std::uint32_t>(i / 1000),
                        static_cast<std::uint16_t>(10000 + 2 * (i % 1000))};
    c.tx = std::make_unique<QueueTransport>(c.address, queue);
    c.engine = std::make_unique<Engine>(*c.tx, nullptr, client_opts);
    clients.push_back(std::move(c));
  }
  const Time start = steady_now();
  for (std::size_t i = 0; i < clients.size(); ++i) {
    // Spread first deadlines over one period.
    const Time phase = t_ka * static_cast<long long>(i) / static_cast<long long>(o.sessions);
    clients[i].engine->add_session(cfg, start + phase);
  }
  std::map<Address, Engine*> by_address;
  for (auto& c : clients) by_address[c.address] = c.engine.get();

  std::vector<double> processing;
  const Time end = start + from_seconds(o.duration_s);
  std::vector<std::pair<Time, std::size_t>> next(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) {
    next[i] = {*clients[i].engine->next_deadline(), i};
  }
  std::make_heap(next.begin(), next.end(), std::greater<>());
  while (true) {
    const Time now = steady_now();
    if (now >= end) break;
    while (!next.empty() && next.front().first <= now) {
      std::pop_heap(next.begin(), next.end(), std::greater<>());
      const std::size_t i = next.back().second;
      Engine& e = *clients[i].engine;
      e.poll(steady_now());
      next.back().first = e.next_deadline().value_or(Time::max());
      std::push_heap(next.begin(), next.end(), std::greater<>());
    }
    while (!queue.empty()) {
      Frame f = std::move(queue.front());
      queue.pop_front();
      if (f.to == server_addr) {
        const auto t0 = std::chrono::steady_clock::now();
        server.on_frame(f.from, f.channel, f.bytes, steady_now());
        processing.push_back(elapsed_us(t0, std::chrono::steady_clock::now()));
      } else if (auto it = by_address.find(f.to); it != by_address.end()) {
        it->second->on_frame(f.from, f.channel, f.bytes, steady_now());
      }
    }
    Time wake = end;
    if (!next.empty()) wake = std::min(wake, next.front().first);
    const Time slack = wake - steady_now();
    if (slack > Time::zero()) std::this_thread::sleep_for(slack);
  }
  const Time finish = steady_now();

  for (auto& c : clients) {
    const EngineStats& s = c.engine->stats();
    r.deadlines_fired += s.deadlines_fired;
    r.deadline_misses += s.deadlines_late;
    r.max_lateness_ms = std::max(r.max_lateness_ms, to_millis(s.max_lateness));
    for (SessionId id : c.engine->session_ids()) {
      r.requests_sent += c.engine->client(id)->requests_sent();
      r.responses_received += c.engine->client(id)->responses_received();
    }
  }
  r.duration_s = to_seconds(finish - start);
  r.responses_per_s = static_cast<double>(r.responses_received) / r.duration_s;
  r.processing = summarize(processing);
}

void flood(const BenchOptions& o, BenchReport& r) {
  NullTransport tx;
  EngineOptions opts;
  opts.server_template.t_ka = from_millis(o.t_ka_ms);
  Engine server(tx, nullptr, opts);
  const std::size_t peers = std::max<std::size_t>(1, o.sessions);
  std::vector<Address> addresses;
  for (std::size_t i = 0; i < peers; ++i) {
    addresses.push_back(Address{0x0c000000u + static_cast<std::uint32_t>(i / 1000),
                                static_cast<std::uint16_t>(10000 + 2 * (i % 1000))});
  }
  std::vector<double> processing;
  processing.reserve(1 << 20);
  const auto t_start = std::chrono::steady_clock::now();
  const auto t_end = t_start + std::chrono::duration<double>(o.flood_s);
  std::uint64_t seq = 0;
  ProbeBody body;
  auto now = t_start;
  while (now < t_end) {
    for (std::size_t i = 0; i < peers; ++i) {
      const Time t = steady_now();
      body.seq = static_cast<std::uint32_t>(++seq);
      body.tsc = wire_ms(t);
      body.tss = seq > peers ? wire_ms(t) - 5 : 0;
      body.dt = 1;
      body.s_local = static_cast<std::uint32_t>(seq / peers + 1);
      const ProbeBytes bytes = encode_probe(body);
      const auto t0 = std::chrono::steady_clock::now();
      server.on_frame(addresses[i], Channel::kProbe, bytes, t);
      const auto t1 = std::chrono::steady_clock::now();
      if (processing.size() < (1u << 22)) processing.push_back(elapsed_us(t0, t1));
      now = t1;
    }
  }
  r.flood_s = std::chrono::duration<double>(now - t_start).count();
  r.flood_probes = tx.sent;
  r.flood_probes_per_s = static_cast<double>(tx.sent) / r.flood_s;
  r.flood_processing = summarize(processing);
}

}  // namespace

std::string BenchReport::text() const {
  if (empty) return {};
  char buf[2048];
  std::snprintf(buf, sizeof buf,
                "sessions=%zu\nt_ka_ms=%.3f\nduration_s=%.3f\nrequests_sent=%llu\n"
                "responses_received=%llu\nresponses_per_s=%.1f\ndeadlines_fired=%llu\n"
                "deadline_misses=%llu\nmax_lateness_ms=%.3f\nprocessing_p50_us=%.3f\n"
                "processing_p99_us=%.3f\nprocessing_max_us=%.3f\n",
                sessions, t_ka_ms, duration_s, static_cast<unsigned long long>(requests_sent),
                static_cast<unsigned long long>(responses_received), responses_per_s,
                static_cast<unsigned long long>(deadlines_fired),
                static_cast<unsigned long long>(deadline_misses), max_lateness_ms,
                processing.p50_us, processing.p99_us, processing.max_us);
  std::string out = buf;
  if (flood_s > 0.0) {
    std::snprintf(buf, sizeof buf,
                  "flood_s=%.3f\nflood_probes=%llu\nflood_probes_per_s=%.1f\n"
                  "flood_p50_us=%.3f\nflood_p99_us=%.3f\nflood_max_us=%.3f\n",
                  flood_s, static_cast<unsigned long long>(flood_probes), flood_probes_per_s,
                  flood_processing.p50_us, flood_processing.p99_us, flood_processing.max_us);
    out += buf;
  }
  return out;
}

BenchReport run_bench(const BenchOptions& o) {
  if (o.duration_s < 0.0 || o.flood_s < 0.0) throw InputError("durations must be >= 0");
  if (!(o.t_ka_ms > 0.0)) throw InputError("t_ka must be positive");
  if (o.sessions == 0 || o.sessions > 60000) throw InputError("sessions must be in [1, 60000]");
  BenchReport r;
  if (o.duration_s == 0.0) return r;
  r.empty = false;
  r.sessions = o.sessions;
  r.t_ka_ms = o.t_ka_ms;
  paced(o, r);
  if (o.flood_s > 0.0) flood(o, r);
  return r;
}

}  // namespace kaprobe
