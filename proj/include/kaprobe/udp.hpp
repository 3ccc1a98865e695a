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
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "kaprobe/emulator.hpp"
#include "kaprobe/engine.hpp"

namespace kaprobe {

// Steady-clock time for wall-clock engines.
Time steady_now();

struct Datagram {
  Address from;  // peer probe address, whichever socket received it
  Channel channel = Channel::kProbe;
  std::vector<std::uint8_t> bytes;
};

// Unconnected UDP socket pair: probe port P and data port P + 1. Port 0 picks
// a free pair.
class UdpTransport final : public Transport {
 public:
  // Throws BindError.
  explicit UdpTransport(const Address& bind);
  ~UdpTransport() override;
  UdpTransport(const UdpTransport&) = delete;
  UdpTransport& operator=(const UdpTransport&) = delete;

  void send(const Address& to, Channel channel,
            std::span<const std::uint8_t> bytes) override;
  // Non-blocking; nullopt when both sockets are empty.
  std::optional<Datagram> receive();

  Address local() const { return local_; }
  int probe_fd() const { return fd_[0]; }
  int data_fd() const { return fd_[1]; }

 private:
  std::optional<Datagram> receive_on(int index);

  Address local_;
  int fd_[2] = {-1, -1};
  int next_ = 0;
  std::vector<std::uint8_t> buffer_;
};

// Self-pipe stop flag; request() is async-signal-safe.
class StopSignal {
 public:
  StopSignal();
  ~StopSignal();
  StopSignal(const StopSignal&) = delete;
  StopSignal& operator=(const StopSignal&) = delete;
  void request() noexcept;
  bool requested() const noexcept { return flag_.load(std::memory_order_relaxed); }
  int fd() const { return pipe_[0]; }

 private:
  std::atomic<bool> flag_{false};
  int pipe_[2] = {-1, -1};
};

struct DaemonConfig {
  Role role = Role::kServer;
  Address bind = Address::loopback(47000);
  EngineOptions engine;
  std::vector<SessionConfig> sessions;  // client role
  double duration_s = 0.0;              // 0 runs until stopped
  std::uint16_t control_port = 0;       // 0 disables the control channel
  double data_rate_pps = 0.0;           // synthetic data per session
  std::size_t data_size = 64;
};

struct DaemonStats {
  std::uint64_t frames_in = 0;
  std::uint64_t explicit_requests = 0;
  std::uint64_t piggybacked_requests = 0;
  std::uint64_t explicit_responses = 0;
  std::uint64_t piggybacked_responses = 0;
  std::uint64_t data_sent = 0;
  std::uint64_t data_received = 0;
  std::size_t sessions = 0;
  EngineStats engine;
};

// Wall-clock engine over UDP with an optional localhost control channel.
class Daemon {
 public:
  // Binds every socket; throws ConfigError or BindError.
  Daemon(DaemonConfig config, EventSink* sink = nullptr);
  ~Daemon();
  Daemon(const Daemon&) = delete;
  Daemon& operator=(const Daemon&) = delete;

  // Blocks until request_stop(), a "stop" control command or the duration.
  void run();
  void request_stop() noexcept { stop_.request(); }

  Address local() const { return transport_->local(); }
  std::uint16_t control_port() const { return control_port_; }
  DaemonStats stats() const;

  // One control command; returns the reply text. Must be called from the
  // thread running the daemon (the control channel does this).
  std::string control(std::string_view command);

 private:
  void refresh_stats();
  void pump(Time now);
  void generate_data(Time now);
  void serve_control();

  DaemonConfig config_;
  std::unique_ptr<UdpTransport> transport_;
  std::unique_ptr<Engine> engine_;
  StopSignal stop_;
  int control_fd_ = -1;
  std::uint16_t control_port_ = 0;
  std::optional<Time> next_data_;
  std::vector<std::uint8_t> payload_;
  std::uint64_t frames_in_ = 0;
  mutable std::mutex stats_mu_;
  DaemonStats stats_;
};

// Sends one command to a daemon control port and returns the reply. Throws
// TransportError on timeout.
std::string send_control(std::uint16_t port, std::string_view command,
                         Time timeout = 2s);

struct RelayConfig {
  Address listen = Address::loopback(47200);  // clients probe this pair
  Address upstream = Address::loopback(47000);
  ImpairmentProfile profile = constant_profile(0.0);
  double duration_s = 0.0;
};

struct RelayStats {
  std::uint64_t forwarded_up = 0;
  std::uint64_t forwarded_down = 0;
  std::uint64_t dropped_up = 0;
  std::uint64_t dropped_down = 0;
  std::size_t clients = 0;
};

// Forwards between clients and one upstream server, impairing each client's
// path by the profile. Each client gets its own upstream socket pair.
class Relay {
 public:
  explicit Relay(RelayConfig config);
  ~Relay();
  Relay(const Relay&) = delete;
  Relay& operator=(const Relay&) = delete;

  void run();
  void request_stop() noexcept { stop_.request(); }
  Address local() const { return listen_->local(); }
  RelayStats stats() const;

 private:
  struct Client {
    Address address;
    std::unique_ptr<UdpTransport> upstream;
    std::unique_ptr<LinkEmulator> link;
  };
  struct Pending {
    Time at;
    std::uint64_t order;
    UdpTransport* via;
    Address to;
    Channel channel;
    std::vector<std::uint8_t> bytes;
    friend bool operator>(const Pending& a, const Pending& b) {
      return a.at != b.at ? a.at > b.at : a.order > b.order;
    }
  };

  Client& client(const Address& address, Time now);
  void forward(Client& c, Direction dir, Datagram d, Time now);
  void flush(Time now);

  RelayConfig config_;
  std::unique_ptr<UdpTransport> listen_;
  std::map<Address, Client> clients_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending_;
  std::uint64_t order_ = 0;
  Time origin_{};
  StopSignal stop_;
  mutable std::mutex stats_mu_;
  RelayStats stats_;
};

}  // namespace kaprobe
