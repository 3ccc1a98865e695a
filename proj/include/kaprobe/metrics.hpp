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
#include <utility>

#include "kaprobe/ewma.hpp"
#include "kaprobe/time.hpp"
#include "kaprobe/wire.hpp"

namespace kaprobe {

enum class Metric : std::uint8_t { kRtt, kOwlClient, kOwlServer, kRtl };

const char* metric_name(Metric metric);

struct MetricsConfig {
  Time loss_interval = 2s;  // T_L
  Time rtt_ceiling = 60s;   // larger RTT samples are discarded
  EwmaConfig rtt = EwmaConfig::symmetric(0.1243);
  EwmaConfig owl = EwmaConfig::symmetric(1.243);
  EwmaConfig rtl = EwmaConfig::symmetric(1.243);
};

// Loss fraction over one evaluation interval together with the number of
// excess receptions (received > sent) that is carried into the next interval.
struct IntervalLoss {
  double fraction;
  std::uint32_t excess;
};

// max(1 - received/sent, 0); requires sent > 0.
IntervalLoss interval_loss(std::uint32_t sent, std::uint32_t received);

// RTL = OWL_c + OWL_s - OWL_c * OWL_s. Throws DomainError outside [0, 1].
double rtl_combine(double owl_c, double owl_s);

struct ClientResponseSamples {
  std::optional<double> rtt_ms;
  std::optional<double> owl_c;
  std::optional<double> rtl;
};

// Client end of one monitored path. Sc/Rc count every frame of the session
// (data and probes); the engine calls count_received() for each arriving frame
// before handing a response body to on_response().
class ClientSession {
 public:
  ClientSession(const MetricsConfig& config, Time start);

  // Fills a request body and counts the request as a sent frame.
  ProbeBody build_request(Time now);
  void count_data_sent() { ++sc_; }
  void count_received() { ++rc_; }

  ClientResponseSamples on_response(const ProbeBody& response, Time t_rc);

  std::uint32_t sent() const { return sc_; }
  std::uint32_t received() const { return rc_; }
  std::uint32_t requests_sent() const { return requests_; }
  std::uint32_t responses_received() const { return responses_; }
  std::uint32_t loss_evaluations() const { return evaluations_; }
  std::uint64_t discarded_rtt_samples() const { return discarded_rtt_; }
  std::optional<Time> last_response_time() const { return last_response_; }

  // RTL snapshot counters; responses_last may sit below the live response
  // count when an interval received more replies than it sent requests.
  std::uint32_t rtl_requests_last() const { return requests_last_; }
  std::uint32_t rtl_responses_last() const { return responses_last_; }
  // Replies carried into the next interval by the last evaluation, as a
  // non-positive adjustment of the snapshot.
  std::int64_t rtl_carryover() const { return carryover_; }

  const EwmaEstimator& rtt_ewma() const { return rtt_; }
  const EwmaEstimator& owl_ewma() const { return owl_; }
  const EwmaEstimator& rtl_ewma() const { return rtl_; }
  const MetricsConfig& config() const { return config_; }

 private:
  MetricsConfig config_;
  std::uint32_t seq_ = 0;
  std::uint32_t sc_ = 0;
  std::uint32_t rc_ = 0;

  // Echo state for the next request.
  bool have_response_ = false;
  std::uint32_t tss_stored_ = 0;
  std::uint32_t trc_stored_ = 0;
  std::uint32_t ss_tmp_ = 0;
  std::uint32_t rc_tmp_ = 0;

  // OWL_c snapshots.
  std::uint32_t sc_last_ = 0;
  std::uint32_t rs_last_ = 0;

  // RTL counts probe requests and responses only.
  std::uint32_t requests_ = 0;
  std::uint32_t responses_ = 0;
  std::uint32_t requests_last_ = 0;
  std::uint32_t responses_last_ = 0;
  std::int64_t carryover_ = 0;

  Time interval_start_;
  std::uint32_t evaluations_ = 0;
  std::uint64_t discarded_rtt_ = 0;
  std::optional<Time> last_response_;

  EwmaEstimator rtt_;
  EwmaEstimator owl_;
  EwmaEstimator rtl_;
};

// Request fields a delayed response still needs. Immediate responders never
// keep one past the request handler.
struct PendingResponse {
  std::uint32_t tsc = 0;
  Time received_at{};
  std::uint32_t sc_echo = 0;
  std::uint32_t rs = 0;
};

struct ServerRequestSamples {
  std::optional<double> rtt_ms;
  std::optional<double> owl_s;
};

// Server end of one monitored path. Holds counters, loss snapshots and
// estimators; no per-request timestamps.
class ServerSession {
 public:
  ServerSession(const MetricsConfig& config, Time start);

  void count_received() { ++rs_; }
  void count_data_sent() { ++ss_; }

  // Processes a request body (already counted in Rs) received at t_rs.
  std::pair<ServerRequestSamples, PendingResponse> on_request(
      const ProbeBody& request, Time t_rs);

  // Builds the response for `pending`, sent at t_ss, and counts it in Ss.
  ProbeBody build_response(const PendingResponse& pending, Time t_ss);

  struct Exchange {
    ProbeBody response;
    ServerRequestSamples samples;
  };
  // on_request followed by build_response in one step.
  Exchange respond(const ProbeBody& request, Time t_rs, Time t_ss);

  std::uint32_t sent() const { return ss_; }
  std::uint32_t received() const { return rs_; }
  std::uint32_t loss_evaluations() const { return evaluations_; }
  std::uint64_t discarded_rtt_samples() const { return discarded_rtt_; }

  const EwmaEstimator& rtt_ewma() const { return rtt_; }
  const EwmaEstimator& owl_ewma() const { return owl_; }
  const MetricsConfig& config() const { return config_; }

 private:
  MetricsConfig config_;
  std::uint32_t seq_ = 0;
  std::uint32_t ss_ = 0;
  std::uint32_t rs_ = 0;
  std::uint32_t ss_last_ = 0;
  std::uint32_t rc_last_ = 0;
  Time interval_start_;
  std::uint32_t evaluations_ = 0;
  std::uint64_t discarded_rtt_ = 0;

  EwmaEstimator rtt_;
  EwmaEstimator owl_;
};

}  // namespace kaprobe
