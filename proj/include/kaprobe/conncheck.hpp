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
#include <optional>
#include <vector>

#include "kaprobe/time.hpp"

namespace kaprobe {

enum class LinkStatus : std::uint8_t { kUnknown, kUp, kDown };

const char* link_status_name(LinkStatus status);

struct Transition {
  Time at;
  LinkStatus from;
  LinkStatus to;
};

// Up/Down declaration for one path. The path is declared down when a check
// finds no response within the last K * T_KA; `recovery_responses`
// consecutive responses bring it back up.
class ConnectivityMonitor {
 public:
  // Throws DomainError unless k >= 1, t_ka > 0 and recovery_responses >= 1.
  ConnectivityMonitor(int k, Time t_ka, Time start, int recovery_responses = 1);

  // Run once per keep-alive period, at probe-send time.
  std::optional<Transition> tick(Time now);
  std::optional<Transition> on_response(Time now);

  LinkStatus status() const { return status_; }
  Time timeout() const { return timeout_; }
  int k() const { return k_; }
  Time keepalive_period() const { return t_ka_; }
  // Session start until the first response arrives.
  Time last_response_time() const { return last_response_; }
  bool has_response() const { return has_response_; }
  const std::vector<Transition>& transitions() const { return transitions_; }

 private:
  Transition move_to(LinkStatus to, Time now);

  int k_;
  Time t_ka_;
  Time timeout_;
  int recovery_responses_;
  LinkStatus status_ = LinkStatus::kUnknown;
  Time last_response_;
  bool has_response_ = false;
  int responses_since_down_ = 0;
  std::vector<Transition> transitions_;
};

struct Responsiveness {
  double worst_ms;    // (K + 1) T_KA + RTT_max
  double average_ms;  // (K + 1/2) T_KA + RTT_avg / 2
};

// Throws DomainError for k < 1, t_ka <= 0 or negative RTTs.
Responsiveness responsiveness(int k, double t_ka_ms, double rtt_max_ms,
                              double rtt_avg_ms);

// Probability that K consecutive probes go unacknowledged when each direction
// loses independently with probability p: (2p - p^2)^K.
double false_positive_prob(double p_loss, int k);

// Mean interval between false positives in seconds, T_KA / p_fp. nullopt means
// the interval is infinite (p_fp == 0).
std::optional<double> false_positive_interval_s(double p_loss, int k,
                                                double t_ka_ms);

}  // namespace kaprobe
