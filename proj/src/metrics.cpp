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

#include "kaprobe/metrics.hpp"

#include <algorithm>

#include "kaprobe/errors.hpp"

namespace kaprobe {
namespace {

std::uint32_t ceiling_ms(const MetricsConfig& config) {
  return static_cast<std::uint32_t>(config.rtt_ceiling.count() / 1000);
}

}  // namespace

const char* metric_name(Metric metric) {
  switch (metric) {
    case Metric::kRtt: return "rtt";
    case Metric::kOwlClient: return "owl_c";
    case Metric::kOwlServer: return "owl_s";
    case Metric::kRtl: return "rtl";
  }
  return "unknown";
}

IntervalLoss interval_loss(std::uint32_t sent, std::uint32_t received) {
  if (received >= sent) return {0.0, received - sent};
  return {static_cast<double>(sent - received) / static_cast<double>(sent), 0};
}

double rtl_combine(double owl_c, double owl_s) {
  if (!(owl_c >= 0.0 && owl_c <= 1.0) || !(owl_s >= 0.0 && owl_s <= 1.0)) {
    throw DomainError("loss fractions must lie in [0, 1]");
  }
  return owl_c + owl_s - owl_c * owl_s;
}

ClientSession::ClientSession(const MetricsConfig& config, Time start)
    : config_(config),
      interval_start_(start),
      rtt_(config.rtt),
      owl_(config.owl),
      rtl_(config.rtl) {}

ProbeBody ClientSession::build_request(Time now) {
  ++sc_;
  ++requests_;
  ProbeBody body;
  body.seq = ++seq_;
  body.tsc = wire_ms(now);
  body.tss = tss_stored_;
  body.dt = have_response_ ? wire_diff(body.tsc, trc_stored_) : 0;
  body.s_local = sc_;
  body.s_echo = ss_tmp_;
  body.r = rc_tmp_;
  return body;
}

ClientResponseSamples ClientSession::on_response(const ProbeBody& response,
                                                 Time t_rc) {
  ClientResponseSamples out;
  ++responses_;
  const std::uint32_t trc = wire_ms(t_rc);
  const double at_s = to_seconds(t_rc);

  const std::uint32_t rtt = trc - response.tsc - response.dt;
  if (rtt <= ceiling_ms(config_)) {
    out.rtt_ms = static_cast<double>(rtt);
    rtt_.update(*out.rtt_ms, at_s);
  } else {
    ++discarded_rtt_;
  }

  have_response_ = true;
  tss_stored_ = response.tss;
  trc_stored_ = trc;
  ss_tmp_ = response.s_local;
  rc_tmp_ = rc_;
  last_response_ = t_rc;

  if (t_rc - interval_start_ < config_.loss_interval) return out;

  bool evaluated = false;
  // OWL_c pairs the echoed Sc(k) with Rs(k), both taken when request k was
  // handled, so frames still in flight are never counted as lost.
  const std::uint32_t sent = response.s_echo - sc_last_;
  if (sent != 0) {
    const IntervalLoss loss = interval_loss(sent, response.r - rs_last_);
    out.owl_c = loss.fraction;
    owl_.update(loss.fraction, at_s);
    sc_last_ = response.s_echo;
    rs_last_ = response.r - loss.excess;
    evaluated = true;
  }
  const std::uint32_t requested = requests_ - requests_last_;
  if (requested != 0) {
    const IntervalLoss loss = interval_loss(requested, responses_ - responses_last_);
    out.rtl = loss.fraction;
    rtl_.update(loss.fraction, at_s);
    requests_last_ = requests_;
    responses_last_ = responses_ - loss.excess;
    carryover_ = -static_cast<std::int64_t>(loss.excess);
    evaluated = true;
  }
  if (evaluated) {
    ++evaluations_;
    interval_start_ = t_rc;
  }
  return out;
}

ServerSession::ServerSession(const MetricsConfig& config, Time start)
    : config_(config), interval_start_(start), rtt_(config.rtt), owl_(config.owl) {}

std::pair<ServerRequestSamples, PendingResponse> ServerSession::on_request(
    const ProbeBody& request, Time t_rs) {
  ServerRequestSamples out;
  const std::uint32_t trs = wire_ms(t_rs);
  const double at_s = to_seconds(t_rs);

  // tss == 0 marks a client that has not yet seen a response.
  if (request.tss != 0) {
    const std::uint32_t rtt = trs - request.tss - request.dt;
    if (rtt <= ceiling_ms(config_)) {
      out.rtt_ms = static_cast<double>(rtt);
      rtt_.update(*out.rtt_ms, at_s);
    } else {
      ++discarded_rtt_;
    }
  }

  if (t_rs - interval_start_ >= config_.loss_interval) {
    const std::uint32_t sent = request.s_echo - ss_last_;
    if (sent != 0) {
      const IntervalLoss loss = interval_loss(sent, request.r - rc_last_);
      out.owl_s = loss.fraction;
      owl_.update(loss.fraction, at_s);
      ss_last_ = request.s_echo;
      rc_last_ = request.r - loss.excess;
      ++evaluations_;
      interval_start_ = t_rs;
    }
  }

  PendingResponse pending;
  pending.tsc = request.tsc;
  pending.received_at = t_rs;
  pending.sc_echo = request.s_local;
  pending.rs = rs_;
  return {out, pending};
}

ProbeBody ServerSession::build_response(const PendingResponse& pending, Time t_ss) {
  ++ss_;
  ProbeBody body;
  body.seq = ++seq_;
  body.tsc = pending.tsc;
  body.tss = wire_ms(t_ss);
  body.dt = wire_diff(body.tss, wire_ms(pending.received_at));
  body.s_local = ss_;
  body.s_echo = pending.sc_echo;
  body.r = pending.rs;
  return body;
}

ServerSession::Exchange ServerSession::respond(const ProbeBody& request, Time t_rs,
                                               Time t_ss) {
  auto [samples, pending] = on_request(request, t_rs);
  return Exchange{build_response(pending, t_ss), samples};
}

}  // namespace kaprobe
