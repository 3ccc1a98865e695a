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

#include <gtest/gtest.h>

#include "kaprobe/engine.hpp"
#include "kaprobe/errors.hpp"

namespace kaprobe {
namespace {

struct Sent {
  Address to;
  Channel channel;
  std::vector<std::uint8_t> bytes;
};

class CaptureTransport final : public Transport {
 public:
  void send(const Address& to, Channel channel, std::span<const std::uint8_t> bytes) override {
    if (fail) throw TransportError("down");
    sent.push_back({to, channel, {bytes.begin(), bytes.end()}});
  }
  std::vector<Sent> sent;
  bool fail = false;
};

const Address kServer = Address::loopback(47000);
const Address kClient = Address::loopback(50000);

SessionConfig client_config() {
  SessionConfig c;
  c.peer = kServer;
  return c;
}

TEST(EngineConfig, Validation) {
  auto bad = [](auto mutate) {
    SessionConfig c = client_config();
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](SessionConfig& c) { c.k = 0; });
  bad([](SessionConfig& c) { c.n = 0; });
  bad([](SessionConfig& c) { c.t_ka = Time(0); });
  bad([](SessionConfig& c) { c.alpha = 1.0; });
  bad([](SessionConfig& c) { c.mtu_budget = 29; });
  bad([](SessionConfig& c) { c.recovery_responses = 0; });
  bad([](SessionConfig& c) { c.rtt_ewma = EwmaConfig::symmetric(-1.0); });
  EXPECT_NO_THROW(client_config().validate());
}

TEST(EngineConfig, DefaultTimeConstantsFollowAlpha) {
  SessionConfig c = client_config();
  c.alpha = 0.8;
  c.t_ka = 200ms;
  c.n = 10;
  const MetricsConfig m = c.metrics();
  EXPECT_NEAR(m.rtt.tau_up_s, 0.1243, 1e-4);
  EXPECT_NEAR(m.owl.tau_up_s, 1.243, 1e-3);
  EXPECT_EQ(m.loss_interval, 2s);
}

TEST(Engine, ClientProbesEveryPeriod) {
  CaptureTransport t;
  Engine e(t);
  const SessionId id = e.add_session(client_config(), Time(0));
  EXPECT_EQ(e.next_deadline(), Time(0));
  for (int i = 0; i < 10; ++i) e.poll(Time(i * 200'000));
  ASSERT_EQ(t.sent.size(), 10u);
  for (std::size_t i = 0; i < t.sent.size(); ++i) {
    EXPECT_EQ(t.sent[i].to, kServer);
    EXPECT_EQ(t.sent[i].channel, Channel::kProbe);
    EXPECT_EQ(decode_probe(t.sent[i].bytes).seq, i + 1);
  }
  EXPECT_EQ(e.session_stats(id).explicit_requests, 10u);
  EXPECT_EQ(e.next_deadline(), Time(2'000'000));
}

TEST(Engine, LatePollSkipsMissedPeriods) {
  CaptureTransport t;
  Engine e(t);
  e.add_session(client_config(), Time(0));
  e.poll(Time(0));
  e.poll(Time(1'050'000));
  EXPECT_EQ(t.sent.size(), 2u);
  EXPECT_EQ(e.next_deadline(), Time(1'200'000));
  EXPECT_EQ(e.stats().deadlines_late, 1u);
}

TEST(Engine, DuplicatePeerRejected) {
  CaptureTransport t;
  Engine e(t);
  e.add_session(client_config(), Time(0));
  EXPECT_THROW(e.add_session(client_config(), Time(0)), InputError);
  SessionConfig bad = client_config();
  bad.peer = kClient;
  bad.k = 0;
  EXPECT_THROW(e.add_session(bad, Time(0)), ConfigError);
}

TEST(Engine, RemoveAndFind) {
  CaptureTransport t;
  Engine e(t);
  const SessionId id = e.add_session(client_config(), Time(0));
  EXPECT_EQ(e.find(kServer), id);
  EXPECT_TRUE(e.remove_session(id));
  EXPECT_FALSE(e.remove_session(id));
  EXPECT_FALSE(e.find(kServer));
  e.poll(Time(1'000'000));
  EXPECT_TRUE(t.sent.empty());
  EXPECT_FALSE(e.next_deadline());
  EXPECT_THROW(e.session_stats(id), InputError);
}

TEST(Engine, FirstSessionIdIsConfigurable) {
  CaptureTransport t;
  EngineOptions o;
  o.first_session_id = 1001;
  Engine e(t, nullptr, o);
  EXPECT_EQ(e.add_session(client_config(), Time(0)), 1001u);
}

TEST(Engine, ServerAnswersUnknownPeerImmediately) {
  CaptureTransport t;
  Engine server(t);
  ProbeBody req;
  req.seq = 1;
  req.tsc = 100;
  req.s_local = 1;
  server.on_frame(kClient, Channel::kProbe, encode_probe(req), Time(5'000'000));
  ASSERT_EQ(server.session_count(), 1u);
  ASSERT_EQ(t.sent.size(), 1u);
  EXPECT_EQ(t.sent[0].to, kClient);
  const ProbeBody resp = decode_probe(t.sent[0].bytes);
  EXPECT_EQ(resp.tsc, 100u);
  EXPECT_EQ(resp.dt, 0u);
  EXPECT_EQ(resp.s_echo, 1u);
  EXPECT_EQ(resp.r, 1u);
  EXPECT_EQ(server.pending_responses(), 0u);
  EXPECT_EQ(server.stats().max_pending_responses, 0u);
  const SessionId id = server.session_ids().at(0);
  EXPECT_EQ(server.config(id).role, Role::kServer);
  EXPECT_TRUE(server.server(id));
  EXPECT_FALSE(server.client(id));
}

TEST(Engine, ServerCanRejectUnknownPeers) {
  CaptureTransport t;
  EngineOptions o;
  o.accept_unknown_peers = false;
  Engine server(t, nullptr, o);
  server.on_frame(kClient, Channel::kProbe, encode_probe({}), Time(0));
  EXPECT_EQ(server.session_count(), 0u);
  EXPECT_EQ(server.stats().unknown_peer_frames, 1u);
  EXPECT_TRUE(t.sent.empty());
}

TEST(Engine, MalformedFramesAreCounted) {
  CaptureTransport t;
  Engine e(t);
  const SessionId id = e.add_session(client_config(), Time(0));
  std::vector<std::uint8_t> short_probe(10), v6{0x60, 1, 2};
  e.on_frame(kServer, Channel::kProbe, short_probe, Time(0));
  e.on_frame(kServer, Channel::kData, v6, Time(0));
  e.on_frame(kServer, Channel::kData, {}, Time(0));
  EXPECT_EQ(e.stats().malformed_frames, 3u);
  (void)id;
}

TEST(Engine, TransportErrorsAreCounted) {
  CaptureTransport t;
  t.fail = true;
  Engine e(t);
  e.add_session(client_config(), Time(0));
  e.poll(Time(0));
  EXPECT_EQ(e.stats().send_errors, 1u);
}

TEST(Engine, DataIsDeliveredWithVersionFour) {
  CaptureTransport t;
  Engine e(t);
  std::vector<std::vector<std::uint8_t>> got;
  e.set_data_handler([&](SessionId, const InnerDatagram& d) {
    got.emplace_back(d.bytes().begin(), d.bytes().end());
  });
  e.add_session(client_config(), Time(0));
  const auto plain = InnerDatagram::make(std::vector<std::uint8_t>{1, 2, 3});
  ProbeBody resp;
  const auto framed = *attach_piggyback(plain, resp, 1472);
  e.on_frame(kServer, Channel::kData, plain.bytes(), Time(10));
  e.on_frame(kServer, Channel::kData, framed.bytes(), Time(20));
  ASSERT_EQ(got.size(), 2u);
  for (const auto& g : got) {
    EXPECT_EQ(g[0] >> 4, 4);
    EXPECT_EQ(g, std::vector<std::uint8_t>(plain.bytes().begin(), plain.bytes().end()));
  }
}

TEST(Engine, ClientPiggybacksOncePerPeriod) {
  CaptureTransport t;
  Engine e(t);
  SessionConfig c = client_config();
  c.piggyback = true;
  const SessionId id = e.add_session(c, Time(0));
  e.poll(Time(0));  // nothing carried yet: explicit probe
  std::vector<std::uint8_t> payload(100, 7);
  for (int i = 1; i < 50; ++i) {
    e.poll(Time(i * 20'000));
    e.send_data(id, payload, Time(i * 20'000 + 1));
  }
  const SessionStats& s = e.session_stats(id);
  EXPECT_EQ(s.explicit_requests, 1u);
  EXPECT_EQ(s.piggybacked_requests, 5u);  // periods starting at 0.2 .. 1.0 s
  EXPECT_EQ(s.data_sent, 49u);
  int framed = 0;
  for (const auto& f : t.sent) {
    if (f.channel == Channel::kData && (f.bytes[0] >> 4) == 15) ++framed;
  }
  EXPECT_EQ(framed, 5);
}

TEST(Engine, OversizedDataIsNotPiggybacked) {
  CaptureTransport t;
  Engine e(t);
  SessionConfig c = client_config();
  c.piggyback = true;
  c.mtu_budget = 100;
  const SessionId id = e.add_session(c, Time(1));
  std::vector<std::uint8_t> big(80);
  e.send_data(id, big, Time(0));
  e.poll(Time(1));
  EXPECT_EQ(e.session_stats(id).piggybacked_requests, 0u);
  EXPECT_EQ(e.session_stats(id).explicit_requests, 1u);
  EXPECT_FALSE(e.send_data(999, big, Time(2)));
}

TEST(Engine, ServerHoldsResponseForPiggyback) {
  CaptureTransport t;
  EngineOptions o;
  o.server_template.piggyback = true;
  Engine server(t, nullptr, o);
  ProbeBody req;
  req.tsc = 1;
  req.s_local = 1;
  server.on_frame(kClient, Channel::kProbe, encode_probe(req), Time(0));
  EXPECT_TRUE(t.sent.empty());
  EXPECT_EQ(server.pending_responses(), 1u);
  EXPECT_EQ(server.next_deadline(), Time(200'000));
  const SessionId id = server.session_ids().at(0);
  std::vector<std::uint8_t> payload(10);
  server.send_data(id, payload, Time(70'000));
  ASSERT_EQ(t.sent.size(), 1u);
  EXPECT_EQ(t.sent[0].channel, Channel::kData);
  const auto parts = extract_piggyback(InnerDatagram(t.sent[0].bytes));
  ASSERT_TRUE(parts);
  EXPECT_EQ(parts->second.dt, 70u);  // hold time is reported
  EXPECT_EQ(server.pending_responses(), 0u);
  // Next request with no data: flushed explicitly after one period.
  server.on_frame(kClient, Channel::kProbe, encode_probe(req), Time(200'000));
  server.poll(Time(399'999));
  EXPECT_EQ(t.sent.size(), 1u);
  server.poll(Time(400'000));
  ASSERT_EQ(t.sent.size(), 2u);
  EXPECT_EQ(t.sent[1].channel, Channel::kProbe);
  EXPECT_EQ(decode_probe(t.sent[1].bytes).dt, 200u);
  EXPECT_EQ(server.session_stats(id).piggybacked_responses, 1u);
  EXPECT_EQ(server.session_stats(id).explicit_responses, 1u);
}

TEST(Engine, NewRequestFlushesHeldResponse) {
  CaptureTransport t;
  EngineOptions o;
  o.server_template.piggyback = true;
  Engine server(t, nullptr, o);
  ProbeBody req;
  req.tsc = 1;
  server.on_frame(kClient, Channel::kProbe, encode_probe(req), Time(0));
  req.tsc = 150;
  server.on_frame(kClient, Channel::kProbe, encode_probe(req), Time(150'000));
  ASSERT_EQ(t.sent.size(), 1u);
  EXPECT_EQ(decode_probe(t.sent[0].bytes).tsc, 1u);
  EXPECT_EQ(server.pending_responses(), 1u);
}

TEST(Engine, ReentryIsRejected) {
  CaptureTransport t;
  Engine e(t);
  const SessionId id = e.add_session(client_config(), Time(0));
  e.set_data_handler([&](SessionId, const InnerDatagram&) { e.poll(Time(0)); });
  const auto plain = InnerDatagram::make(std::vector<std::uint8_t>{1});
  EXPECT_THROW(e.on_frame(kServer, Channel::kData, plain.bytes(), Time(0)), std::logic_error);
  (void)id;
}

TEST(Engine, SetPiggybackToggles) {
  CaptureTransport t;
  Engine e(t);
  const SessionId id = e.add_session(client_config(), Time(0));
  e.set_piggyback(id, true);
  EXPECT_TRUE(e.config(id).piggyback);
  e.set_piggyback(id, false);
  EXPECT_FALSE(e.config(id).piggyback);
  EXPECT_THROW(e.set_piggyback(77, true), InputError);
}

}  // namespace
}  // namespace kaprobe
