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

#include <thread>
#include <unistd.h>

#include "kaprobe/errors.hpp"
#include "kaprobe/udp.hpp"

namespace kaprobe {
namespace {

std::optional<Datagram> wait_receive(UdpTransport& t, Time timeout = 1s) {
  const Time end = steady_now() + timeout;
  while (steady_now() < end) {
    if (auto d = t.receive()) return d;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  return std::nullopt;
}

std::uint16_t test_control_port() {
  return static_cast<std::uint16_t>(40000 + (::getpid() % 5000) * 2);
}

SessionConfig client_session(const Address& peer, Time t_ka = 100ms) {
  SessionConfig c;
  c.peer = peer;
  c.t_ka = t_ka;
  return c;
}

TEST(UdpTransport, LoopbackBothChannels) {
  UdpTransport a(Address::loopback(0));
  UdpTransport b(Address::loopback(0));
  ASSERT_NE(a.local().port, 0);
  const std::vector<std::uint8_t> payload{1, 2, 3, 4};
  a.send(b.local(), Channel::kProbe, payload);
  auto d = wait_receive(b);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->channel, Channel::kProbe);
  EXPECT_EQ(d->bytes, payload);
  EXPECT_EQ(d->from, a.local());

  a.send(b.local(), Channel::kData, payload);
  d = wait_receive(b);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->channel, Channel::kData);
  // Data arrives from port P + 1 but is attributed to the probe address.
  EXPECT_EQ(d->from, a.local());
  EXPECT_FALSE(b.receive());
}

TEST(UdpTransport, PortPairIsAdjacent) {
  UdpTransport a(Address::loopback(0));
  UdpTransport probe_taken(Address::loopback(0));
  EXPECT_THROW(UdpTransport(probe_taken.local()), BindError);
  EXPECT_THROW(UdpTransport(Address{probe_taken.local().ip,
                                    static_cast<std::uint16_t>(probe_taken.local().port - 1)}),
               BindError);
}

TEST(Daemon, ClientAndServerOverLoopback) {
  MemorySink server_events, client_events;
  DaemonConfig sc;
  sc.role = Role::kServer;
  sc.bind = Address::loopback(0);
  sc.duration_s = 2.0;
  Daemon server(sc, &server_events);

  DaemonConfig cc;
  cc.role = Role::kClient;
  cc.bind = Address::loopback(0);
  cc.sessions = {client_session(server.local())};
  cc.duration_s = 1.05;
  Daemon client(cc, &client_events);

  std::thread st([&] { server.run(); });
  client.run();
  server.request_stop();
  st.join();

  const auto rtt = client_events.measurements(Metric::kRtt);
  EXPECT_GE(rtt.size(), 9u);
  EXPECT_LE(rtt.size(), 11u);
  for (const auto& r : rtt) {
    EXPECT_GE(r.raw, 0.0);
    EXPECT_LT(r.raw, 50.0);
  }
  EXPECT_FALSE(server_events.measurements(Metric::kRtt).empty());
  const auto statuses = client_events.statuses();
  ASSERT_FALSE(statuses.empty());
  EXPECT_EQ(statuses.front().to, LinkStatus::kUp);
  const DaemonStats cs = client.stats();
  EXPECT_EQ(cs.sessions, 1u);
  EXPECT_GE(cs.explicit_requests, 10u);
  EXPECT_EQ(server.stats().sessions, 1u);
}

TEST(Daemon, RejectsUnknownPeersWhenConfigured) {
  MemorySink server_events, client_events;
  DaemonConfig sc;
  sc.bind = Address::loopback(0);
  sc.engine.accept_unknown_peers = false;
  Daemon server(sc, &server_events);
  DaemonConfig cc;
  cc.role = Role::kClient;
  cc.bind = Address::loopback(0);
  cc.sessions = {client_session(server.local())};
  cc.duration_s = 0.5;
  Daemon client(cc, &client_events);
  std::thread st([&] { server.run(); });
  client.run();
  server.request_stop();
  st.join();
  EXPECT_EQ(server.stats().sessions, 0u);
  EXPECT_TRUE(client_events.measurements(Metric::kRtt).empty());
}

TEST(Daemon, ControlChannel) {
  DaemonConfig sc;
  sc.bind = Address::loopback(0);
  sc.duration_s = 5.0;
  Daemon server(sc);
  DaemonConfig cc;
  cc.role = Role::kClient;
  cc.bind = Address::loopback(0);
  cc.control_port = test_control_port();
  cc.duration_s = 10.0;
  Daemon client(cc);
  ASSERT_EQ(client.control_port(), cc.control_port);
  std::thread st([&] { server.run(); });
  std::thread ct([&] { client.run(); });
  const std::uint16_t port = client.control_port();

  EXPECT_EQ(send_control(port, "list"), "");
  const std::string added =
      send_control(port, "add " + server.local().to_string() + " t_ka_ms=50 k=2");
  EXPECT_EQ(added, "ok 1\n");
  EXPECT_EQ(send_control(port, "piggyback 1 on"), "ok\n");
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  const std::string list = send_control(port, "list");
  EXPECT_EQ(list, "1 " + server.local().to_string() + " client piggyback=on status=up\n");
  const std::string stats = send_control(port, "stats");
  EXPECT_NE(stats.find("sessions=1\n"), std::string::npos) << stats;
  EXPECT_NE(stats.find("explicit_requests="), std::string::npos);

  EXPECT_EQ(send_control(port, "frobnicate").rfind("error ", 0), 0u);
  EXPECT_EQ(send_control(port, "remove 99").rfind("error ", 0), 0u);
  EXPECT_EQ(send_control(port, "piggyback 1 sometimes").rfind("error ", 0), 0u);
  EXPECT_EQ(send_control(port, "add 1.2.3.4:5 bogus=1").rfind("error ", 0), 0u);
  EXPECT_EQ(send_control(port, "remove 1"), "ok\n");
  EXPECT_EQ(send_control(port, "list"), "");

  const Time before = steady_now();
  EXPECT_EQ(send_control(port, "stop"), "ok\n");
  ct.join();
  EXPECT_LT(steady_now() - before, 1s);
  server.request_stop();
  st.join();
}

TEST(Daemon, ControlTimeout) {
  // Nothing listens on this port.
  UdpTransport placeholder(Address::loopback(0));
  EXPECT_THROW(send_control(placeholder.local().port, "list", 100ms), TransportError);
}

TEST(Daemon, BindConflictThrows) {
  DaemonConfig sc;
  sc.bind = Address::loopback(0);
  Daemon a(sc);
  sc.bind = a.local();
  EXPECT_THROW(Daemon b(sc), BindError);
}

TEST(Daemon, SyntheticDataIsPiggybacked) {
  MemorySink client_events;
  DaemonConfig sc;
  sc.bind = Address::loopback(0);
  sc.engine.server_template.piggyback = true;
  sc.data_rate_pps = 50;
  sc.duration_s = 3.0;
  Daemon server(sc);
  DaemonConfig cc;
  cc.role = Role::kClient;
  cc.bind = Address::loopback(0);
  SessionConfig s = client_session(server.local(), 200ms);
  s.piggyback = true;
  cc.sessions = {s};
  cc.data_rate_pps = 50;
  cc.duration_s = 2.0;
  Daemon client(cc, &client_events);
  std::thread st([&] { server.run(); });
  client.run();
  server.request_stop();
  st.join();
  const DaemonStats cs = client.stats();
  EXPECT_LE(cs.explicit_requests, 1u);
  EXPECT_GE(cs.piggybacked_requests, 8u);
  EXPECT_GE(cs.data_sent, 80u);
  EXPECT_GE(client_events.measurements(Metric::kRtt).size(), 8u);
}

TEST(Relay, ForwardsWithDelay) {
  MemorySink client_events;
  DaemonConfig sc;
  sc.bind = Address::loopback(0);
  Daemon server(sc);
  RelayConfig rc;
  rc.listen = Address::loopback(0);
  rc.upstream = server.local();
  rc.profile = constant_profile(40.0);
  Relay relay(rc);
  DaemonConfig cc;
  cc.role = Role::kClient;
  cc.bind = Address::loopback(0);
  cc.sessions = {client_session(relay.local())};
  cc.duration_s = 1.05;
  Daemon client(cc, &client_events);
  std::thread st([&] { server.run(); });
  std::thread rt([&] { relay.run(); });
  client.run();
  relay.request_stop();
  server.request_stop();
  rt.join();
  st.join();
  const auto rtt = client_events.measurements(Metric::kRtt);
  ASSERT_GE(rtt.size(), 8u);
  for (const auto& r : rtt) {
    EXPECT_GE(r.raw, 39.0);
    EXPECT_LT(r.raw, 80.0);
  }
  const RelayStats rs = relay.stats();
  EXPECT_EQ(rs.clients, 1u);
  EXPECT_GE(rs.forwarded_up, 10u);
  EXPECT_GE(rs.forwarded_down, 8u);
  EXPECT_EQ(rs.dropped_up + rs.dropped_down, 0u);
}

TEST(Relay, TotalLossTakesTheLinkDown) {
  MemorySink client_events;
  DaemonConfig sc;
  sc.bind = Address::loopback(0);
  Daemon server(sc);
  RelayConfig rc;
  rc.listen = Address::loopback(0);
  rc.upstream = server.local();
  rc.profile = constant_profile(0.0, 1.0, 0.0);
  Relay relay(rc);
  DaemonConfig cc;
  cc.role = Role::kClient;
  cc.bind = Address::loopback(0);
  cc.sessions = {client_session(relay.local())};
  cc.duration_s = 0.8;
  Daemon client(cc, &client_events);
  std::thread st([&] { server.run(); });
  std::thread rt([&] { relay.run(); });
  client.run();
  relay.request_stop();
  server.request_stop();
  rt.join();
  st.join();
  EXPECT_TRUE(client_events.measurements(Metric::kRtt).empty());
  const auto statuses = client_events.statuses();
  ASSERT_FALSE(statuses.empty());
  EXPECT_EQ(statuses.back().to, LinkStatus::kDown);
  EXPECT_GT(relay.stats().dropped_up, 0u);
  EXPECT_EQ(relay.stats().forwarded_up, 0u);
}

}  // namespace
}  // namespace kaprobe
