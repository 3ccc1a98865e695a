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

#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "kaprobe.h"
#include "kaprobe/bench.hpp"
#include "kaprobe/config.hpp"
#include "kaprobe/conncheck.hpp"
#include "kaprobe/emulator.hpp"
#include "kaprobe/errors.hpp"
#include "kaprobe/ewma.hpp"
#include "kaprobe/experiments.hpp"
#include "kaprobe/log.hpp"
#include "kaprobe/metrics.hpp"
#include "kaprobe/planner.hpp"
#include "kaprobe/udp.hpp"
#include "kaprobe/wire.hpp"

using namespace kaprobe;

struct kap_ewma {
  EwmaEstimator estimator;
};

struct kap_config {
  RunConfig config;
};

namespace {

// Lets the daemon bind before the log output is opened.
class LateSink final : public EventSink {
 public:
  void on_measurement(const MeasurementRecord& r) override {
    if (target) target->on_measurement(r);
  }
  void on_status(const StatusRecord& r) override {
    if (target) target->on_status(r);
  }
  EventSink* target = nullptr;
};

}  // namespace

struct kap_daemon {
  LateSink sink;
  std::unique_ptr<std::ofstream> file;
  std::unique_ptr<LogWriter> writer;
  std::unique_ptr<AsyncLogWriter> async;
  std::unique_ptr<Daemon> daemon;
};

struct kap_relay {
  std::unique_ptr<Relay> relay;
};

struct kap_experiment {
  ExperimentResult result;
  LogFormat format;
};

namespace {

thread_local std::string g_last_error;

kap_status fail(kap_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
kap_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const Error& e) {
    return fail(static_cast<kap_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(KAP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KAP_ERR_INTERNAL, e.what());
  }
}

#define KAP_REQUIRE(ptr)                                         \
  do {                                                           \
    if ((ptr) == nullptr) return fail(KAP_ERR_NULL, #ptr " is NULL"); \
  } while (0)

kap_status put_bytes(std::span<const std::uint8_t> bytes, std::uint8_t* out, size_t cap,
                     size_t* needed) {
  if (needed) *needed = bytes.size();
  if (out == nullptr) return KAP_OK;
  if (cap < bytes.size()) return fail(KAP_ERR_BUFFER, "output buffer too small");
  std::memcpy(out, bytes.data(), bytes.size());
  return KAP_OK;
}

kap_status put_string(const std::string& s, char* out, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (out == nullptr) return KAP_OK;
  if (cap < s.size() + 1) return fail(KAP_ERR_BUFFER, "output buffer too small");
  std::memcpy(out, s.c_str(), s.size() + 1);
  return KAP_OK;
}

ProbeBody from_c(const kap_probe_body& b) {
  return ProbeBody{b.seq, b.tsc, b.tss, b.dt, b.s_local, b.s_echo, b.r};
}

kap_probe_body to_c(const ProbeBody& b) {
  return kap_probe_body{b.seq, b.tsc, b.tss, b.dt, b.s_local, b.s_echo, b.r};
}

PlannerInput from_c(const kap_plan_input& in) {
  PlannerInput p;
  p.p_loss = in.p_loss;
  p.rtt_avg_ms = in.rtt_avg_ms;
  p.t_ravg_max_ms = in.t_ravg_max_ms;
  p.t_fp_min_s = in.t_fp_min_s;
  p.t_ka_min_ms = in.t_ka_min_ms;
  p.k_max = in.k_max;
  p.granularity_ms = in.granularity_ms;
  p.worst_case = in.worst_case != 0;
  p.rtt_max_ms = in.rtt_max_ms;
  return p;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += s + "\n";
  return out;
}

}  // namespace

extern "C" {

const char* kap_status_name(kap_status status) {
  switch (status) {
    case KAP_OK: return "ok";
    case KAP_ERR_BUFFER: return "buffer";
    case KAP_ERR_NULL: return "null";
    case KAP_ERR_INTERNAL: return "internal";
    case KAP_UNCHANGED: return "unchanged";
    case KAP_NOT_PIGGYBACKED: return "not_piggybacked";
    case KAP_INFINITE: return "infinite";
    default: break;
  }
  if (status >= KAP_ERR_LENGTH && status <= KAP_ERR_TRANSPORT) {
    return error_code_name(static_cast<ErrorCode>(status));
  }
  return "unknown";
}

const char* kap_last_error(void) { return g_last_error.c_str(); }

const char* kap_version(void) { return "1.0.0"; }

kap_status kap_probe_encode(const kap_probe_body* body, uint8_t out[KAP_PROBE_BODY_SIZE]) {
  KAP_REQUIRE(body);
  KAP_REQUIRE(out);
  return guarded([&] {
    encode_probe(from_c(*body), std::span<std::uint8_t, kProbeBodySize>(out, kProbeBodySize));
    return KAP_OK;
  });
}

kap_status kap_probe_decode(const uint8_t* bytes, size_t len, kap_probe_body* body) {
  KAP_REQUIRE(body);
  if (bytes == nullptr && len != 0) return fail(KAP_ERR_NULL, "bytes is NULL");
  return guarded([&] {
    *body = to_c(decode_probe(std::span<const std::uint8_t>(bytes, len)));
    return KAP_OK;
  });
}

kap_status kap_piggyback_attach(const uint8_t* inner, size_t len, const kap_probe_body* body,
                                size_t mtu_budget, uint8_t* out, size_t cap, size_t* needed) {
  KAP_REQUIRE(inner);
  KAP_REQUIRE(body);
  return guarded([&] {
    InnerDatagram d(std::vector<std::uint8_t>(inner, inner + len));
    auto framed = attach_piggyback(d, from_c(*body), mtu_budget);
    if (!framed) {
      if (needed) *needed = 0;
      return KAP_UNCHANGED;
    }
    return put_bytes(framed->bytes(), out, cap, needed);
  });
}

kap_status kap_piggyback_extract(const uint8_t* frame, size_t len, uint8_t* out, size_t cap,
                                 size_t* needed, kap_probe_body* body) {
  KAP_REQUIRE(frame);
  return guarded([&] {
    auto parts = extract_piggyback(InnerDatagram(std::vector<std::uint8_t>(frame, frame + len)));
    if (!parts) {
      if (needed) *needed = 0;
      return KAP_NOT_PIGGYBACKED;
    }
    const kap_status st = put_bytes(parts->first.bytes(), out, cap, needed);
    if (st == KAP_OK && body) *body = to_c(parts->second);
    return st;
  });
}

kap_status kap_frame_classify(kap_channel channel, kap_direction direction,
                              const uint8_t* bytes, size_t len, kap_frame_kind* kind) {
  KAP_REQUIRE(kind);
  if (bytes == nullptr && len != 0) return fail(KAP_ERR_NULL, "bytes is NULL");
  if (channel != KAP_CHANNEL_PROBE && channel != KAP_CHANNEL_DATA) {
    return fail(KAP_ERR_INPUT, "bad channel");
  }
  if (direction != KAP_CLIENT_TO_SERVER && direction != KAP_SERVER_TO_CLIENT) {
    return fail(KAP_ERR_INPUT, "bad direction");
  }
  return guarded([&] {
    *kind = static_cast<kap_frame_kind>(
        classify_frame(static_cast<Channel>(channel), static_cast<Direction>(direction),
                       std::span<const std::uint8_t>(bytes, len)));
    return KAP_OK;
  });
}

kap_status kap_ewma_create(double tau_worse_s, double tau_better_s, int worse_is_decrease,
                           int reference_previous, kap_ewma** out) {
  KAP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    EwmaConfig c;
    c.tau_up_s = tau_worse_s;
    c.tau_down_s = tau_better_s;
    c.worse = worse_is_decrease ? WorseDirection::kDecrease : WorseDirection::kIncrease;
    c.reference = reference_previous ? AsymmetryReference::kPreviousSample
                                     : AsymmetryReference::kEstimate;
    *out = new kap_ewma{EwmaEstimator(c)};
    return KAP_OK;
  });
}

kap_status kap_ewma_update(kap_ewma* ewma, double sample, double at_s, int* accepted) {
  KAP_REQUIRE(ewma);
  return guarded([&] {
    const bool ok = ewma->estimator.update(sample, at_s);
    if (accepted) *accepted = ok ? 1 : 0;
    return KAP_OK;
  });
}

kap_status kap_ewma_value(const kap_ewma* ewma, double* value, int* initialized) {
  KAP_REQUIRE(ewma);
  KAP_REQUIRE(value);
  *value = ewma->estimator.value();
  if (initialized) *initialized = ewma->estimator.initialized() ? 1 : 0;
  return KAP_OK;
}

void kap_ewma_destroy(kap_ewma* ewma) { delete ewma; }

kap_status kap_tau_from_alpha(double alpha, double interval_s, double* tau_s) {
  KAP_REQUIRE(tau_s);
  return guarded([&] {
    *tau_s = tau_from_alpha(alpha, interval_s);
    return KAP_OK;
  });
}

kap_status kap_timeliness(double tau_s, double* seconds) {
  KAP_REQUIRE(seconds);
  return guarded([&] {
    *seconds = timeliness(tau_s);
    return KAP_OK;
  });
}

kap_status kap_rtl_combine(double owl_c, double owl_s, double* rtl) {
  KAP_REQUIRE(rtl);
  return guarded([&] {
    *rtl = rtl_combine(owl_c, owl_s);
    return KAP_OK;
  });
}

kap_status kap_responsiveness(int k, double t_ka_ms, double rtt_max_ms, double rtt_avg_ms,
                              double* worst_ms, double* average_ms) {
  return guarded([&] {
    const Responsiveness r = responsiveness(k, t_ka_ms, rtt_max_ms, rtt_avg_ms);
    if (worst_ms) *worst_ms = r.worst_ms;
    if (average_ms) *average_ms = r.average_ms;
    return KAP_OK;
  });
}

kap_status kap_false_positive_prob(double p_loss, int k, double* p_fp) {
  KAP_REQUIRE(p_fp);
  return guarded([&] {
    *p_fp = false_positive_prob(p_loss, k);
    return KAP_OK;
  });
}

kap_status kap_false_positive_interval(double p_loss, int k, double t_ka_ms, double* seconds) {
  KAP_REQUIRE(seconds);
  return guarded([&] {
    auto v = false_positive_interval_s(p_loss, k, t_ka_ms);
    if (!v) return KAP_INFINITE;
    *seconds = *v;
    return KAP_OK;
  });
}

void kap_plan_input_default(kap_plan_input* input) {
  if (!input) return;
  const PlannerInput p;
  *input = kap_plan_input{p.p_loss,    p.rtt_avg_ms,     p.t_ravg_max_ms,
                          p.t_fp_min_s, p.t_ka_min_ms,   p.k_max,
                          p.granularity_ms, p.worst_case ? 1 : 0, p.rtt_max_ms};
}

kap_status kap_plan_solve(const kap_plan_input* input, kap_plan_result* result) {
  KAP_REQUIRE(input);
  KAP_REQUIRE(result);
  return guarded([&] {
    const PlannerResult r = solve(from_c(*input));
    *result = kap_plan_result{r.feasible ? 1 : 0, r.k_star,  r.t_ka_star_ms,
                              r.t_ka_operational_ms, r.p_fp, r.t_fp_s,
                              r.t_ravg_ms,           r.t_rmax_ms};
    return KAP_OK;
  });
}

kap_status kap_plan_sweep_csv(const kap_plan_input* input, const char* sweep,
                              double fixed_t_ka_ms, char* out, size_t cap, size_t* needed) {
  KAP_REQUIRE(input);
  KAP_REQUIRE(sweep);
  return guarded([&] {
    SweepSpec range = parse_sweep(sweep);
    if (fixed_t_ka_ms > 0.0) range.fixed_t_ka_ms = fixed_t_ka_ms;
    return put_string(tradeoff_curves(from_c(*input), range).to_csv(), out, cap, needed);
  });
}

kap_status kap_profile_names(char* out, size_t cap, size_t* needed) {
  return guarded([&] { return put_string(join(library_profile_names()), out, cap, needed); });
}

kap_status kap_profile_describe(const char* name_or_path, char* out, size_t cap,
                                size_t* needed) {
  KAP_REQUIRE(name_or_path);
  return guarded([&] {
    return put_string(format_profile(resolve_profile(name_or_path)), out, cap, needed);
  });
}

kap_status kap_config_create(kap_config** out) {
  KAP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new kap_config{};
    return KAP_OK;
  });
}

kap_status kap_config_load(const char* path, kap_config** out) {
  KAP_REQUIRE(path);
  KAP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new kap_config{RunConfig::load(path)};
    return KAP_OK;
  });
}

kap_status kap_config_parse(const char* text, kap_config** out) {
  KAP_REQUIRE(text);
  KAP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    *out = new kap_config{RunConfig::parse(text)};
    return KAP_OK;
  });
}

kap_status kap_config_set(kap_config* config, const char* key, const char* value) {
  KAP_REQUIRE(config);
  KAP_REQUIRE(key);
  KAP_REQUIRE(value);
  return guarded([&] {
    // Check the value now rather than at validate time.
    RunConfig trial = config->config;
    trial.set(key, value);
    trial.session_defaults();
    trial.validate("");
    config->config = std::move(trial);
    return KAP_OK;
  });
}

kap_status kap_config_add_peer(kap_config* config, const char* peer) {
  KAP_REQUIRE(config);
  KAP_REQUIRE(peer);
  return guarded([&] {
    config->config.add_peer(peer);
    return KAP_OK;
  });
}

kap_status kap_config_validate(const kap_config* config, const char* verb) {
  KAP_REQUIRE(config);
  KAP_REQUIRE(verb);
  return guarded([&] {
    config->config.validate(verb);
    return KAP_OK;
  });
}

kap_status kap_config_get(const kap_config* config, const char* key, char* out, size_t cap,
                          size_t* needed) {
  KAP_REQUIRE(config);
  KAP_REQUIRE(key);
  return guarded([&] {
    auto v = config->config.get(key);
    if (!v) return fail(KAP_ERR_INPUT, std::string("key not set: ") + key);
    return put_string(*v, out, cap, needed);
  });
}

void kap_config_destroy(kap_config* config) { delete config; }

kap_status kap_daemon_create(const kap_config* config, const char* verb, kap_daemon** out) {
  KAP_REQUIRE(config);
  KAP_REQUIRE(verb);
  KAP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const std::string v = verb;
    if (v != "server" && v != "client") return fail(KAP_ERR_INPUT, "verb must be server or client");
    const RunConfig& rc = config->config;
    rc.validate(v);
    DaemonConfig dc;
    dc.role = v == "server" ? Role::kServer : Role::kClient;
    dc.bind = rc.bind(v == "server" ? Address::loopback(47000) : Address::loopback(0));
    dc.engine.accept_unknown_peers = dc.role == Role::kServer && rc.accept_unknown();
    dc.engine.server_template = rc.session_defaults();
    dc.engine.server_template.role = Role::kServer;
    if (dc.role == Role::kClient) dc.sessions = rc.sessions();
    dc.duration_s = rc.duration_s();
    dc.control_port = rc.control_port();
    dc.data_rate_pps = rc.data_rate_pps();
    dc.data_size = rc.data_size();

    auto d = std::make_unique<kap_daemon>();
    d->daemon = std::make_unique<Daemon>(std::move(dc), &d->sink);
    const std::string path = rc.out();
    if (!path.empty()) {
      std::ostream* stream = &std::cout;
      if (path != "-") {
        d->file = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
        if (!*d->file) return fail(KAP_ERR_CONFIG, "cannot open log file " + path);
        stream = d->file.get();
      }
      d->writer = std::make_unique<LogWriter>(*stream, rc.log_format());
      d->async = std::make_unique<AsyncLogWriter>(*d->writer);
      d->sink.target = d->async.get();
    }
    *out = d.release();
    return KAP_OK;
  });
}

kap_status kap_daemon_run(kap_daemon* daemon) {
  KAP_REQUIRE(daemon);
  return guarded([&] {
    daemon->daemon->run();
    if (daemon->async) daemon->async->drain();
    if (daemon->writer) daemon->writer->flush();
    return KAP_OK;
  });
}

void kap_daemon_stop(kap_daemon* daemon) {
  if (daemon && daemon->daemon) daemon->daemon->request_stop();
}

kap_status kap_daemon_port(const kap_daemon* daemon, uint16_t* probe_port,
                           uint16_t* control_port) {
  KAP_REQUIRE(daemon);
  if (probe_port) *probe_port = daemon->daemon->local().port;
  if (control_port) *control_port = daemon->daemon->control_port();
  return KAP_OK;
}

kap_status kap_daemon_stats_get(const kap_daemon* daemon, kap_daemon_stats* stats) {
  KAP_REQUIRE(daemon);
  KAP_REQUIRE(stats);
  const DaemonStats s = daemon->daemon->stats();
  *stats = kap_daemon_stats{s.frames_in,
                            s.explicit_requests,
                            s.piggybacked_requests,
                            s.explicit_responses,
                            s.piggybacked_responses,
                            s.data_sent,
                            s.data_received,
                            s.sessions,
                            s.engine.malformed_frames,
                            s.engine.send_errors,
                            daemon->async ? daemon->async->forwarded() : 0,
                            daemon->async ? daemon->async->dropped() : 0};
  return KAP_OK;
}

void kap_daemon_destroy(kap_daemon* daemon) {
  if (!daemon) return;
  daemon->daemon.reset();
  if (daemon->async) daemon->async->stop();
  if (daemon->writer) daemon->writer->flush();
  delete daemon;
}

kap_status kap_control_send(uint16_t port, const char* command, char* out, size_t cap,
                            size_t* needed) {
  KAP_REQUIRE(command);
  return guarded([&] { return put_string(send_control(port, command), out, cap, needed); });
}

kap_status kap_relay_create(const kap_config* config, kap_relay** out) {
  KAP_REQUIRE(config);
  KAP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const RunConfig& rc = config->config;
    rc.validate("relay");
    RelayConfig c;
    c.listen = rc.listen().value_or(Address::loopback(47200));
    c.upstream = *rc.upstream();
    ProfileOptions po;
    po.seed = rc.seed();
    c.profile = rc.profile().empty() ? constant_profile(0.0) : resolve_profile(rc.profile(), po);
    c.profile.seed = rc.seed();
    c.duration_s = rc.duration_s();
    *out = new kap_relay{std::make_unique<Relay>(std::move(c))};
    return KAP_OK;
  });
}

kap_status kap_relay_run(kap_relay* relay) {
  KAP_REQUIRE(relay);
  return guarded([&] {
    relay->relay->run();
    return KAP_OK;
  });
}

void kap_relay_stop(kap_relay* relay) {
  if (relay && relay->relay) relay->relay->request_stop();
}

kap_status kap_relay_port(const kap_relay* relay, uint16_t* port) {
  KAP_REQUIRE(relay);
  KAP_REQUIRE(port);
  *port = relay->relay->local().port;
  return KAP_OK;
}

kap_status kap_relay_stats_get(const kap_relay* relay, kap_relay_stats* stats) {
  KAP_REQUIRE(relay);
  KAP_REQUIRE(stats);
  const RelayStats s = relay->relay->stats();
  *stats = kap_relay_stats{s.forwarded_up, s.forwarded_down, s.dropped_up, s.dropped_down,
                           s.clients};
  return KAP_OK;
}

void kap_relay_destroy(kap_relay* relay) { delete relay; }

void kap_experiment_options_default(kap_experiment_options* o) {
  if (!o) return;
  std::memset(o, 0, sizeof *o);
  o->seed = 1;
  o->t_ka_ms = -1.0;
  o->k = -1;
  o->n = -1;
  o->trials = -1;
  o->duration_s = -1.0;
  o->rtt_ms = -1.0;
  o->p_loss = -1.0;
  o->data_rate_pps = -1.0;
}

kap_status kap_experiment_names(char* out, size_t cap, size_t* needed) {
  return guarded([&] { return put_string(join(experiment_names()), out, cap, needed); });
}

kap_status kap_experiment_run(const char* name, const kap_experiment_options* options,
                              kap_experiment** out) {
  KAP_REQUIRE(name);
  KAP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    kap_experiment_options defaults;
    kap_experiment_options_default(&defaults);
    const kap_experiment_options& c = options ? *options : defaults;
    if (c.alpha_count > KAP_MAX_LIST || c.tau_count > KAP_MAX_LIST ||
        c.k_count > KAP_MAX_LIST) {
      return fail(KAP_ERR_INPUT, "list too long");
    }
    ExperimentOptions o;
    o.seed = c.seed;
    o.log_format = c.log_jsonl ? LogFormat::kJsonl : LogFormat::kCsv;
    if (c.t_ka_ms >= 0.0) o.t_ka_ms = c.t_ka_ms;
    if (c.k >= 0) o.k = c.k;
    if (c.n >= 0) o.n = c.n;
    o.alphas.assign(c.alphas, c.alphas + c.alpha_count);
    o.taus_s.assign(c.taus_s, c.taus_s + c.tau_count);
    if (c.trials >= 0) o.trials = static_cast<std::uint64_t>(c.trials);
    if (c.duration_s >= 0.0) o.duration_s = c.duration_s;
    if (c.rtt_ms >= 0.0) o.rtt_ms = c.rtt_ms;
    if (c.p_loss >= 0.0) o.p_loss = c.p_loss;
    o.ks.assign(c.ks, c.ks + c.k_count);
    if (c.profile) o.profile = c.profile;
    if (c.fault_direction) o.fault_direction = c.fault_direction;
    o.data_rate_pps = c.data_rate_pps;
    o.wall_clock = c.wall_clock != 0;
    *out = new kap_experiment{run_experiment(name, o), o.log_format};
    return KAP_OK;
  });
}

kap_status kap_experiment_summary(const kap_experiment* exp, char* out, size_t cap,
                                  size_t* needed) {
  KAP_REQUIRE(exp);
  return guarded([&] { return put_string(exp->result.summary_text(), out, cap, needed); });
}

kap_status kap_experiment_value(const kap_experiment* exp, const char* key, double* value) {
  KAP_REQUIRE(exp);
  KAP_REQUIRE(key);
  KAP_REQUIRE(value);
  return guarded([&] {
    *value = exp->result.value(key);
    return KAP_OK;
  });
}

kap_status kap_experiment_log(const kap_experiment* exp, char* out, size_t cap,
                              size_t* needed) {
  KAP_REQUIRE(exp);
  return guarded([&] { return put_string(exp->result.log, out, cap, needed); });
}

kap_status kap_experiment_write(const kap_experiment* exp, const char* dir, char* out,
                                size_t cap, size_t* needed) {
  KAP_REQUIRE(exp);
  KAP_REQUIRE(dir);
  return guarded([&] {
    return put_string(join(write_experiment(exp->result, dir, exp->format)), out, cap, needed);
  });
}

void kap_experiment_destroy(kap_experiment* exp) { delete exp; }

void kap_bench_options_default(kap_bench_options* options) {
  if (!options) return;
  const BenchOptions b;
  *options = kap_bench_options{b.sessions, b.t_ka_ms, b.duration_s, b.flood_s};
}

kap_status kap_bench_run(const kap_bench_options* options, kap_bench_report* report,
                         char* text, size_t cap, size_t* needed) {
  KAP_REQUIRE(options);
  return guarded([&] {
    BenchOptions b;
    b.sessions = options->sessions;
    b.t_ka_ms = options->t_ka_ms;
    b.duration_s = options->duration_s;
    b.flood_s = options->flood_s;
    const BenchReport r = run_bench(b);
    if (report) {
      *report = kap_bench_report{r.empty ? 1 : 0,       r.requests_sent,
                                 r.responses_received,  r.responses_per_s,
                                 r.deadlines_fired,     r.deadline_misses,
                                 r.max_lateness_ms,     r.processing.p50_us,
                                 r.processing.p99_us,   r.flood_probes_per_s};
    }
    if (needed || text) return put_string(r.text(), text, cap, needed);
    return KAP_OK;
  });
}

}  // extern "C"
