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

#include <compare>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kaprobe/conncheck.hpp"
#include "kaprobe/metrics.hpp"
#include "kaprobe/time.hpp"
#include "kaprobe/wire.hpp"

namespace kaprobe {

using SessionId = std::uint32_t;

// IPv4 endpoint. `port` is the probe port; the data port is port + 1.
struct Address {
  std::uint32_t ip = 0;  // host byte order
  std::uint16_t port = 0;

  friend auto operator<=>(const Address&, const Address&) = default;

  std::string to_string() const;
  // "a.b.c.d:port". Throws InputError.
  static Address parse(std::string_view text);
  static Address loopback(std::uint16_t port) { return Address{0x7f000001u, port}; }
};

struct MeasurementRecord {
  SessionId session = 0;
  Time time{};
  Metric metric = Metric::kRtt;
  double raw = 0.0;
  double ewma = 0.0;
};

struct StatusRecord {
  SessionId session = 0;
  Time time{};
  LinkStatus from = LinkStatus::kUnknown;
  LinkStatus to = LinkStatus::kUnknown;
};

// Receives engine events. Implementations shared between engines must accept
// concurrent calls.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_measurement(const MeasurementRecord& record) = 0;
  virtual void on_status(const StatusRecord& record) = 0;
};

// Collects events in memory; thread-safe.
class MemorySink final : public EventSink {
 public:
  void on_measurement(const MeasurementRecord& record) override {
    std::lock_guard lock(mu_);
    measurements_.push_back(record);
  }
  void on_status(const StatusRecord& record) override {
    std::lock_guard lock(mu_);
    statuses_.push_back(record);
  }
  std::vector<MeasurementRecord> measurements() const {
    std::lock_guard lock(mu_);
    return measurements_;
  }
  std::vector<StatusRecord> statuses() const {
    std::lock_guard lock(mu_);
    return statuses_;
  }
  std::vector<MeasurementRecord> measurements(Metric metric) const;
  void clear() {
    std::lock_guard lock(mu_);
    measurements_.clear();
    statuses_.clear();
  }

 private:
  mutable std::mutex mu_;
  std::vector<MeasurementRecord> measurements_;
  std::vector<StatusRecord> statuses_;
};

// Fans events out to several sinks.
class TeeSink final : public EventSink {
 public:
  explicit TeeSink(std::vector<EventSink*> sinks) : sinks_(std::move(sinks)) {}
  void on_measurement(const MeasurementRecord& r) override {
    for (auto* s : sinks_) s->on_measurement(r);
  }
  void on_status(const StatusRecord& r) override {
    for (auto* s : sinks_) s->on_status(r);
  }

 private:
  std::vector<EventSink*> sinks_;
};

// Datagram transport used by an engine. Throws TransportError on failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Address& to, Channel channel,
                    std::span<const std::uint8_t> bytes) = 0;
};

}  // namespace kaprobe
