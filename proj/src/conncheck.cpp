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

#include "kaprobe/conncheck.hpp"

#include <cmath>

#include "kaprobe/errors.hpp"

namespace kaprobe {

const char* link_status_name(LinkStatus status) {
  switch (status) {
    case LinkStatus::kUnknown: return "unknown";
    case LinkStatus::kUp: return "up";
    case LinkStatus::kDown: return "down";
  }
  return "invalid";
}

ConnectivityMonitor::ConnectivityMonitor(int k, Time t_ka, Time start,
                                         int recovery_responses)
    : k_(k),
      t_ka_(t_ka),
      timeout_(t_ka * k),
      recovery_responses_(recovery_responses),
      last_response_(start) {
  if (k < 1) throw DomainError("K must be at least 1");
  if (t_ka <= Time::zero()) throw DomainError("T_KA must be positive");
  if (recovery_responses < 1) throw DomainError("recovery count must be >= 1");
}

Transition ConnectivityMonitor::move_to(LinkStatus to, Time now) {
  Transition t{now, status_, to};
  status_ = to;
  transitions_.push_back(t);
  return t;
}

std::optional<Transition> ConnectivityMonitor::tick(Time now) {
  if (now - last_response_ < timeout_) return std::nullopt;
  responses_since_down_ = 0;
  if (status_ == LinkStatus::kDown) return std::nullopt;
  return move_to(LinkStatus::kDown, now);
}

std::optional<Transition> ConnectivityMonitor::on_response(Time now) {
  last_response_ = now;
  has_response_ = true;
  if (status_ == LinkStatus::kUp) return std::nullopt;
  if (status_ == LinkStatus::kDown &&
      ++responses_since_down_ < recovery_responses_) {
    return std::nullopt;
  }
  responses_since_down_ = 0;
  return move_to(LinkStatus::kUp, now);
}

Responsiveness responsiveness(int k, double t_ka_ms, double rtt_max_ms,
                              double rtt_avg_ms) {
  if (k < 1) throw DomainError("K must be at least 1");
  if (!(t_ka_ms > 0.0)) throw DomainError("T_KA must be positive");
  if (!(rtt_max_ms >= 0.0) || !(rtt_avg_ms >= 0.0)) {
    throw DomainError("RTT must be non-negative");
  }
  return Responsiveness{(k + 1.0) * t_ka_ms + rtt_max_ms,
                        (k + 0.5) * t_ka_ms + rtt_avg_ms / 2.0};
}

double false_positive_prob(double p_loss, int k) {
  if (!(p_loss >= 0.0 && p_loss <= 1.0)) {
    throw DomainError("p_loss must lie in [0, 1]");
  }
  if (k < 1) throw DomainError("K must be at least 1");
  const double unacked = 2.0 * p_loss - p_loss * p_loss;
  return std::pow(unacked, k);
}

std::optional<double> false_positive_interval_s(double p_loss, int k,
                                                double t_ka_ms) {
  if (!(t_ka_ms > 0.0)) throw DomainError("T_KA must be positive");
  const double p_fp = false_positive_prob(p_loss, k);
  if (p_fp == 0.0) return std::nullopt;
  return (t_ka_ms / 1000.0) / p_fp;
}

}  // namespace kaprobe
