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

#include "kaprobe/udp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <sstream>

#include "kaprobe/config.hpp"
#include "kaprobe/errors.hpp"

namespace kaprobe {

Time steady_now() {
  return std::chrono::duration_cast<Time>(std::chrono::steady_clock::now().time_since_epoch());
}

namespace {

sockaddr_in to_sockaddr(std::uint32_t ip, std::uint16_t port) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_addr.s_addr = htonl(ip);
  sa.sin_port = htons(port);
  return sa;
}

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

int open_socket() {
  const int fd = ::socket(AF_INET, SOCK_DGRAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
  if (fd < 0) throw BindError(errno_text("socket"));
  return fd;
}

bool try_bind(int fd, std::uint32_t ip, std::uint16_t port) {
  const sockaddr_in sa = to_sockaddr(ip, port);
  return ::bind(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) == 0;
}

std::uint16_t bound_port(int fd) {
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&sa), &len);
  return ntohs(sa.sin_port);
}

int wait_readable(std::vector<pollfd>& fds, Time timeout) {
  const auto ms = std::clamp<long long>((timeout.count() + 999) / 1000, 0, 100);
  return ::poll(fds.data(), fds.size(), static_cast<int>(ms));
}

void drain_fd(int fd) {
  char buf[64];
  while (::read(fd, buf, sizeof buf) > 0) {
  }
}

}  // namespace

UdpTransport::UdpTransport(const Address& bind) : buffer_(65536) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    fd_[0] = open_socket();
    fd_[1] = open_socket();
    if (!try_bind(fd_[0], bind.ip, bind.port)) {
      const std::string msg = errno_text(("bind " + bind.to_string()).c_str());
      ::close(fd_[0]);
      ::close(fd_[1]);
      fd_[0] = fd_[1] = -1;
      throw BindError(msg);
    }
    const std::uint16_t port = bound_port(fd_[0]);
    if (port < 65535 && try_bind(fd_[1], bind.ip, static_cast<std::uint16_t>(port + 1))) {
      local_ = Address{bind.ip, port};
      return;
    }
    const std::string msg = errno_text(("bind data port of " + bind.to_string()).c_str());
    ::close(fd_[0]);
    ::close(fd_[1]);
    fd_[0] = fd_[1] = -1;
    if (bind.port != 0) throw BindError(msg);
  }
  throw BindError("no free port pair");
}

UdpTransport::~UdpTransport() {
  for (int fd : fd_) {
    if (fd >= 0) ::close(fd);
  }
}

void UdpTransport::send(const Address& to, Channel channel,
                        std::span<const std::uint8_t> bytes) {
  const int index = channel == Channel::kProbe ? 0 : 1;
  const std::uint16_t port =
      static_cast<std::uint16_t>(channel == Channel::kProbe ? to.port : to.port + 1);
  const sockaddr_in sa = to_sockaddr(to.ip, port);
  const ssize_t n = ::sendto(fd_[index], bytes.data(), bytes.size(), 0,
                             reinterpret_cast<const sockaddr*>(&sa), sizeof sa);
  if (n < 0 || static_cast<std::size_t>(n) != bytes.size()) {
    throw TransportError(errno_text(("sendto " + to.to_string()).c_str()));
  }
}

std::optional<Datagram> UdpTransport::receive_on(int index) {
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  const ssize_t n = ::recvfrom(fd_[index], buffer_.data(), buffer_.size(), 0,
                               reinterpret_cast<sockaddr*>(&sa), &len);
  if (n < 0) return std::nullopt;
  std::uint16_t port = ntohs(sa.sin_port);
  if (index == 1) {
    if (port == 0) return Datagram{};  // unmappable source; caller drops it
    --port;
  }
  Datagram d;
  d.from = Address{ntohl(sa.sin_addr.s_addr), port};
  d.channel = index == 0 ? Channel::kProbe : Channel::kData;
  d.bytes.assign(buffer_.begin(), buffer_.begin() + n);
  return d;
}

std::optional<Datagram> UdpTransport::receive() {
  // Alternate sockets so neither starves the other.
  for (int i = 0; i < 2; ++i) {
    const int index = next_;
    next_ ^= 1;
    if (auto d = receive_on(index)) return d;
  }
  return std::nullopt;
}

StopSignal::StopSignal() {
  if (::pipe2(pipe_, O_NONBLOCK | O_CLOEXEC) != 0) {
    throw TransportError(errno_text("pipe2"));
  }
}

StopSignal::~StopSignal() {
  for (int fd : pipe_) {
    if (fd >= 0) ::close(fd);
  }
}

void StopSignal::request() noexcept {
  flag_.store(true, std::memory_order_relaxed);
  const char c = 1;
  [[maybe_unused]] const auto n = ::write(pipe_[1], &c, 1);
}

Daemon::Daemon(DaemonConfig config, EventSink* sink) : config_(std::move(config)) {
  for (auto& s : config_.sessions) {
    s.role = Role::kClient;
    s.validate();
  }
  config_.engine.server_template.validate();
  if (config_.data_rate_pps < 0.0) throw ConfigError("data rate must be >= 0");
  transport_ = std::make_unique<UdpTransport>(config_.bind);
  if (config_.control_port != 0) {
    control_fd_ = open_socket();
    if (!try_bind(control_fd_, 0x7f000001u, config_.control_port)) {
      const std::string msg = errno_text("bind control port");
      ::close(control_fd_);
      control_fd_ = -1;
      throw BindError(msg);
    }
    control_port_ = bound_port(control_fd_);
  }
  engine_ = std::make_unique<Engine>(*transport_, sink, config_.engine);
  const Time now = steady_now();
  for (const auto& s : config_.sessions) engine_->add_session(s, now);
  payload_.assign(config_.data_size, 0);
  for (std::size_t i = 0; i < payload_.size(); ++i) {
    payload_[i] = static_cast<std::uint8_t>(i * 31 + 7);
  }
  refresh_stats();
}

Daemon::~Daemon() {
  if (control_fd_ >= 0) ::close(control_fd_);
}

void Daemon::refresh_stats() {
  DaemonStats s;
  s.frames_in = frames_in_;
  s.sessions = engine_->session_count();
  for (SessionId id : engine_->session_ids()) {
    const SessionStats& ss = engine_->session_stats(id);
    s.explicit_requests += ss.explicit_requests;
    s.piggybacked_requests += ss.piggybacked_requests;
    s.explicit_responses += ss.explicit_responses;
    s.piggybacked_responses += ss.piggybacked_responses;
    s.data_sent += ss.data_sent;
    s.data_received += ss.data_received;
  }
  s.engine = engine_->stats();
  std::lock_guard lock(stats_mu_);
  stats_ = s;
}

DaemonStats Daemon::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

void Daemon::generate_data(Time now) {
  if (config_.data_rate_pps <= 0.0) return;
  const Time gap = from_seconds(1.0 / config_.data_rate_pps);
  if (!next_data_) next_data_ = now;
  int bursts = 0;
  while (*next_data_ <= now && bursts < 1000) {
    for (SessionId id : engine_->session_ids()) engine_->send_data(id, payload_, now);
    *next_data_ += std::max(gap, Time(1));
    ++bursts;
  }
  if (*next_data_ <= now) next_data_ = now + gap;  // fell behind; skip ahead
}

void Daemon::pump(Time now) {
  engine_->poll(now);
  generate_data(now);
  for (int i = 0; i < 4096; ++i) {
    auto d = transport_->receive();
    if (!d) break;
    ++frames_in_;
    if (d->from.port == 0 && d->bytes.empty()) continue;
    engine_->on_frame(d->from, d->channel, d->bytes, steady_now());
  }
}

void Daemon::serve_control() {
  char buf[2048];
  for (;;) {
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    const ssize_t n = ::recvfrom(control_fd_, buf, sizeof buf, 0,
                                 reinterpret_cast<sockaddr*>(&sa), &len);
    if (n < 0) return;
    std::string reply;
    try {
      reply = control(std::string_view(buf, static_cast<std::size_t>(n)));
    } catch (const std::exception& e) {
      reply = std::string("error ") + e.what();
    }
    ::sendto(control_fd_, reply.data(), reply.size(), 0, reinterpret_cast<sockaddr*>(&sa),
             len);
  }
}

std::string Daemon::control(std::string_view command) {
  std::istringstream in{std::string(command)};
  std::string verb;
  in >> verb;
  std::ostringstream out;
  auto parse_id = [&]() -> SessionId {
    long long id = -1;
    if (!(in >> id) || id < 0) throw InputError("expected a session id");
    engine_->config(static_cast<SessionId>(id));  // throws for unknown ids
    return static_cast<SessionId>(id);
  };
  if (verb == "list") {
    for (SessionId id : engine_->session_ids()) {
      const SessionConfig& c = engine_->config(id);
      const ConnectivityMonitor* m = engine_->monitor(id);
      out << id << ' ' << c.peer.to_string() << ' '
          << (c.role == Role::kClient ? "client" : "server") << " piggyback="
          << (c.piggyback ? "on" : "off") << " status="
          << (m ? link_status_name(m->status()) : "n/a") << '\n';
    }
  } else if (verb == "add") {
    std::string peer;
    if (!(in >> peer)) throw InputError("add needs a peer address");
    SessionConfig c = config_.sessions.empty() ? SessionConfig{} : config_.sessions.front();
    c.role = Role::kClient;
    c.peer = Address::parse(peer);
    std::string kv;
    while (in >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || kv.substr(0, eq) == "peer" ||
          !apply_session_key(c, kv.substr(0, eq), kv.substr(eq + 1))) {
        throw InputError("bad session setting '" + kv + "'");
      }
    }
    out << "ok " << engine_->add_session(c, steady_now()) << '\n';
  } else if (verb == "remove") {
    const SessionId id = parse_id();
    engine_->remove_session(id);
    out << "ok\n";
  } else if (verb == "piggyback") {
    const SessionId id = parse_id();
    std::string mode;
    in >> mode;
    if (mode != "on" && mode != "off") throw InputError("piggyback needs on or off");
    engine_->set_piggyback(id, mode == "on");
    out << "ok\n";
  } else if (verb == "stats") {
    refresh_stats();
    const DaemonStats s = stats();
    out << "sessions=" << s.sessions << "\nframes_in=" << s.frames_in
        << "\nexplicit_requests=" << s.explicit_requests
        << "\npiggybacked_requests=" << s.piggybacked_requests
        << "\nexplicit_responses=" << s.explicit_responses
        << "\npiggybacked_responses=" << s.piggybacked_responses
        << "\ndata_sent=" << s.data_sent << "\ndata_received=" << s.data_received
        << "\nmalformed_frames=" << s.engine.malformed_frames
        << "\nsend_errors=" << s.engine.send_errors << '\n';
  } else if (verb == "stop") {
    request_stop();
    out << "ok\n";
  } else {
    throw InputError("unknown command '" + verb + "'");
  }
  return out.str();
}

void Daemon::run() {
  const Time start = steady_now();
  const bool bounded = config_.duration_s > 0.0;
  const Time end = bounded ? start + from_seconds(config_.duration_s) : Time::max();
  std::vector<pollfd> fds;
  fds.push_back({transport_->probe_fd(), POLLIN, 0});
  fds.push_back({transport_->data_fd(), POLLIN, 0});
  fds.push_back({stop_.fd(), POLLIN, 0});
  if (control_fd_ >= 0) fds.push_back({control_fd_, POLLIN, 0});
  Time last_refresh = start;
  while (!stop_.requested()) {
    Time now = steady_now();
    if (now >= end) break;
    pump(now);
    if (control_fd_ >= 0) serve_control();
    if (now - last_refresh >= 100ms) {
      refresh_stats();
      last_refresh = now;
    }
    now = steady_now();
    Time wake = now + 100ms;
    if (auto d = engine_->next_deadline()) wake = std::min(wake, *d);
    if (next_data_) wake = std::min(wake, *next_data_);
    wake = std::min(wake, end);
    if (wake > now) wait_readable(fds, wake - now);
  }
  drain_fd(stop_.fd());
  refresh_stats();
}

std::string send_control(std::uint16_t port, std::string_view command, Time timeout) {
  const int fd = open_socket();
  const sockaddr_in sa = to_sockaddr(0x7f000001u, port);
  if (::sendto(fd, command.data(), command.size(), 0, reinterpret_cast<const sockaddr*>(&sa),
               sizeof sa) < 0) {
    const std::string msg = errno_text("control send");
    ::close(fd);
    throw TransportError(msg);
  }
  pollfd p{fd, POLLIN, 0};
  const int ready = ::poll(&p, 1, static_cast<int>(timeout.count() / 1000));
  std::string reply;
  if (ready > 0) {
    char buf[65536];
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n >= 0) reply.assign(buf, static_cast<std::size_t>(n));
  }
  ::close(fd);
  if (ready <= 0) throw TransportError("no reply from control port " + std::to_string(port));
  return reply;
}

Relay::Relay(RelayConfig config) : config_(std::move(config)) {
  config_.profile.validate();
  listen_ = std::make_unique<UdpTransport>(config_.listen);
  origin_ = steady_now();
}

Relay::~Relay() = default;

Relay::Client& Relay::client(const Address& address, Time now) {
  auto it = clients_.find(address);
  if (it != clients_.end()) return it->second;
  (void)now;
  Client c;
  c.address = address;
  c.upstream = std::make_unique<UdpTransport>(Address{config_.listen.ip, 0});
  ImpairmentProfile profile = config_.profile;
  profile.seed = config_.profile.seed + clients_.size();
  c.link = std::make_unique<LinkEmulator>(profile, origin_);
  auto [pos, _] = clients_.emplace(address, std::move(c));
  std::lock_guard lock(stats_mu_);
  stats_.clients = clients_.size();
  return pos->second;
}

void Relay::forward(Client& c, Direction dir, Datagram d, Time now) {
  const std::optional<Time> at = c.link->transmit(dir, now);
  const bool up = dir == Direction::kClientToServer;
  {
    std::lock_guard lock(stats_mu_);
    if (!at) {
      ++(up ? stats_.dropped_up : stats_.dropped_down);
    } else {
      ++(up ? stats_.forwarded_up : stats_.forwarded_down);
    }
  }
  if (!at) return;
  pending_.push(Pending{*at, order_++, up ? c.upstream.get() : listen_.get(),
                        up ? config_.upstream : c.address, d.channel, std::move(d.bytes)});
}

void Relay::flush(Time now) {
  while (!pending_.empty() && pending_.top().at <= now) {
    const Pending& p = pending_.top();
    try {
      p.via->send(p.to, p.channel, p.bytes);
    } catch (const TransportError&) {
    }
    pending_.pop();
  }
}

void Relay::run() {
  const Time start = steady_now();
  const bool bounded = config_.duration_s > 0.0;
  const Time end = bounded ? start + from_seconds(config_.duration_s) : Time::max();
  while (!stop_.requested()) {
    Time now = steady_now();
    if (now >= end) break;
    flush(now);
    while (auto d = listen_->receive()) {
      if (d->bytes.empty() && d->from.port == 0) continue;
      forward(client(d->from, now), Direction::kClientToServer, std::move(*d), now);
    }
    for (auto& [addr, c] : clients_) {
      while (auto d = c.upstream->receive()) {
        if (d->from != config_.upstream) continue;
        forward(c, Direction::kServerToClient, std::move(*d), now);
      }
    }
    flush(steady_now());
    std::vector<pollfd> fds;
    fds.push_back({listen_->probe_fd(), POLLIN, 0});
    fds.push_back({listen_->data_fd(), POLLIN, 0});
    fds.push_back({stop_.fd(), POLLIN, 0});
    for (auto& [addr, c] : clients_) {
      fds.push_back({c.upstream->probe_fd(), POLLIN, 0});
      fds.push_back({c.upstream->data_fd(), POLLIN, 0});
    }
    now = steady_now();
    Time wake = now + 100ms;
    if (!pending_.empty()) wake = std::min(wake, pending_.top().at);
    wake = std::min(wake, end);
    if (wake > now) wait_readable(fds, wake - now);
  }
  drain_fd(stop_.fd());
}

RelayStats Relay::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

}  // namespace kaprobe
