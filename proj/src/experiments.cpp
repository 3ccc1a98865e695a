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

#include "kaprobe/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "kaprobe/conncheck.hpp"
#include "kaprobe/emulator.hpp"
#include "kaprobe/errors.hpp"
#include "kaprobe/ewma.hpp"
#include "kaprobe/sim.hpp"

namespace kaprobe {
namespace {

const Address kServer{0x0a000001u, 5000};
constexpr SessionId kServerIdBase = 1001;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

Address client_address(int i) {
  return Address{0x0a000101u + static_cast<std::uint32_t>(i), 6000};
}

std::string indexed(const char* key, std::size_t i) {
  return std::string(key) + "." + std::to_string(i);
}

class StatusOnly final : public EventSink {
 public:
  explicit StatusOnly(EventSink& target) : target_(target) {}
  void on_measurement(const MeasurementRecord&) override {}
  void on_status(const StatusRecord& r) override { target_.on_status(r); }

 private:
  EventSink& target_;
};

struct EventLog {
  explicit EventLog(LogFormat format) : writer(text, format) {}
  std::string str() {
    writer.flush();
    return text.str();
  }
  std::ostringstream text;
  LogWriter writer;
};

EngineOptions server_options(SessionConfig tmpl) {
  EngineOptions o;
  tmpl.role = Role::kServer;
  o.server_template = tmpl;
  o.first_session_id = kServerIdBase;
  return o;
}

EngineOptions client_options(SessionId first_id) {
  EngineOptions o;
  o.accept_unknown_peers = false;
  o.first_session_id = first_id;
  return o;
}

void drive(SimNetwork& net, Time until, bool wall) {
  if (wall) {
    const Time v0 = net.now();
    const auto w0 = std::chrono::steady_clock::now();
    while (auto t = net.next_event_time()) {
      if (*t > until) break;
      std::this_thread::sleep_until(w0 + (*t - v0));
      net.step();
    }
  }
  net.run_until(until);
}

ImpairmentProfile pick_profile(const ExperimentOptions& o, const char* fallback) {
  ProfileOptions po;
  po.seed = o.seed;
  ImpairmentProfile p = o.profile.empty() ? library_profile(fallback, po)
                                          : resolve_profile(o.profile, po);
  p.seed = o.seed;
  return p;
}

double profile_rtt(const ImpairmentProfile& p, double t_s) {
  return p.delay_ms(Direction::kClientToServer, t_s) +
         p.delay_ms(Direction::kServerToClient, t_s);
}

double run_length(const ExperimentOptions& o, const ImpairmentProfile& p, int periods,
                  double fallback) {
  if (o.duration_s) {
    if (!(*o.duration_s > 0.0)) throw InputError("duration must be positive");
    return *o.duration_s;
  }
  return p.period_s ? *p.period_s * periods : fallback;
}

// RTT changes of the profile inside [0, duration).
struct RttChange {
  double at_s;
  double from_ms;
  double to_ms;
};

std::vector<RttChange> rtt_changes(const ImpairmentProfile& p, double duration_s) {
  std::vector<RttChange> out;
  const double period = p.period_s.value_or(duration_s + 1.0);
  for (double base = 0.0; base < duration_s; base += period) {
    for (const Segment& s : p.segments) {
      const double at = base + s.start_s;
      if (at <= 0.0 || at >= duration_s) continue;
      const double from = profile_rtt(p, std::nextafter(at, 0.0));
      const double to = profile_rtt(p, at);
      if (from != to) out.push_back({at, from, to});
    }
    if (!p.period_s) break;
  }
  return out;
}

// One client per estimator against a shared server over identical links.
struct RttRun {
  std::vector<double> times_s;
  std::vector<double> reference_ms;
  std::vector<double> raw_ms;
  std::vector<std::vector<double>> ewma;  // [client][row]
  std::string log;
};

RttRun run_rtt_clients(const ExperimentOptions& o, const ImpairmentProfile& profile,
                       Time t_ka, const std::vector<EwmaConfig>& estimators,
                       double duration_s) {
  EventLog log(o.log_format);
  MemorySink memory;
  TeeSink tee({&log.writer, &memory});
  SimNetwork net;
  SessionConfig base;
  base.t_ka = t_ka;
  base.k = o.k.value_or(3);
  base.n = o.n.value_or(10);
  net.add_engine(kServer, server_options(base), &tee);
  std::vector<SessionId> ids;
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    const Address a = client_address(static_cast<int>(i));
    const SessionId first = static_cast<SessionId>(i + 1);
    net.add_engine(a, client_options(first), &tee);
    net.connect(a, kServer, profile);
    SessionConfig c = base;
    c.rtt_ewma = estimators[i];
    ids.push_back(net.add_client(a, kServer, c));
  }
  drive(net, from_seconds(duration_s), o.wall_clock);

  std::map<Time, std::vector<double>> rows;  // raw, ewma per client
  for (const auto& m : memory.measurements(Metric::kRtt)) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (m.session != ids[i]) continue;
      auto& row = rows[m.time];
      if (row.empty()) row.assign(1 + ids.size(), kNan);
      if (std::isnan(row[0])) row[0] = m.raw;
      row[1 + i] = m.ewma;
    }
  }
  RttRun run;
  run.ewma.resize(ids.size());
  for (const auto& [t, row] : rows) {
    const double ts = to_seconds(t);
    run.times_s.push_back(ts);
    run.reference_ms.push_back(profile_rtt(profile, ts));
    run.raw_ms.push_back(row[0]);
    for (std::size_t i = 0; i < ids.size(); ++i) run.ewma[i].push_back(row[1 + i]);
  }
  run.log = log.str();
  return run;
}

CurveTable rtt_table(const RttRun& run) {
  CurveTable t;
  t.columns = {"time_s", "reference_rtt_ms", "raw_rtt_ms"};
  for (std::size_t i = 0; i < run.ewma.size(); ++i) t.columns.push_back(indexed("ewma_ms", i));
  for (std::size_t r = 0; r < run.times_s.size(); ++r) {
    std::vector<double> row{run.times_s[r], run.reference_ms[r], run.raw_ms[r]};
    for (const auto& e : run.ewma) row.push_back(e[r]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Seconds after `change.at_s` until the trace is within 10% of the change and
// before `until_s`; NaN if it never gets there.
double reach_time(const RttRun& run, const std::vector<double>& ewma, const RttChange& change,
                  double until_s) {
  const double band = 0.1 * std::abs(change.to_ms - change.from_ms);
  for (std::size_t r = 0; r < run.times_s.size(); ++r) {
    const double t = run.times_s[r];
    if (t < change.at_s || std::isnan(ewma[r])) continue;
    if (t >= until_s) break;
    if (std::abs(ewma[r] - change.to_ms) <= band) return t - change.at_s;
  }
  return kNan;
}

double t_ka_ms_of(const ExperimentOptions& o, double fallback) {
  const double v = o.t_ka_ms.value_or(fallback);
  if (!(v > 0.0)) throw InputError("t_ka must be positive");
  return v;
}

ExperimentResult rtt_step(const ExperimentOptions& o) {
  const double t_ka_ms = t_ka_ms_of(o, 200.0);
  const double t_ka_s = t_ka_ms / 1000.0;
  const std::vector<double> alphas =
      o.alphas.empty() ? std::vector<double>{0.8, 0.6, 0.4, 0.2} : o.alphas;
  std::vector<double> taus;
  for (double a : alphas) taus.push_back(tau_from_alpha(a, t_ka_s));
  for (double t : o.taus_s) {
    if (!(t > 0.0)) throw InputError("time constants must be positive");
    taus.push_back(t);
  }
  const ImpairmentProfile profile = pick_profile(o, "RTT-STEP");
  if (profile.segments.size() < 2) throw InputError("rtt-step needs a profile with a step");
  const RttChange step{profile.segments[1].start_s, profile_rtt(profile, 0.0),
                       profile_rtt(profile, profile.segments[1].start_s)};
  const double longest = *std::max_element(taus.begin(), taus.end());
  const double duration =
      o.duration_s.value_or(step.at_s + std::max(10.0, 3.0 * timeliness(longest) + 2.0));

  std::vector<EwmaConfig> estimators;
  for (double t : taus) estimators.push_back(EwmaConfig::symmetric(t));
  RttRun run = run_rtt_clients(o, profile, from_millis(t_ka_ms), estimators, duration);

  ExperimentResult res;
  res.name = "rtt-step";
  res.summary.emplace_back("sample_period_s", t_ka_s);
  res.summary.emplace_back("step_at_s", step.at_s);
  res.summary.emplace_back("step_from_ms", step.from_ms);
  res.summary.emplace_back("step_to_ms", step.to_ms);
  double worst = 0.0;
  bool all_within = true;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double crossing = reach_time(run, run.ewma[i], step, duration + 1.0);
    const double predicted = timeliness(taus[i]);
    const double error = crossing - predicted;
    res.summary.emplace_back(indexed("tau_s", i), taus[i]);
    res.summary.emplace_back(indexed("crossing_s", i), crossing);
    res.summary.emplace_back(indexed("predicted_s", i), predicted);
    res.summary.emplace_back(indexed("error_s", i), error);
    if (std::isnan(error) || std::abs(error) > t_ka_s) all_within = false;
    if (!std::isnan(error)) worst = std::max(worst, std::abs(error));
  }
  res.summary.emplace_back("max_abs_error_s", worst);
  res.summary.emplace_back("all_within_one_period", all_within ? 1.0 : 0.0);
  res.tables.emplace_back("trace", rtt_table(run));
  res.log = std::move(run.log);
  return res;
}

ExperimentResult rtt_3level(const ExperimentOptions& o) {
  const double t_ka_ms = t_ka_ms_of(o, 2000.0);
  const std::vector<double> alphas =
      o.alphas.empty() ? std::vector<double>{0.8, 0.2} : o.alphas;
  std::vector<double> taus;
  for (double a : alphas) taus.push_back(tau_from_alpha(a, t_ka_ms / 1000.0));
  for (double t : o.taus_s) taus.push_back(t);
  const ImpairmentProfile profile = pick_profile(o, "RTT-3LEVEL");
  const double duration = run_length(o, profile, 3, 60.0);
  std::vector<EwmaConfig> estimators;
  for (double t : taus) estimators.push_back(EwmaConfig::symmetric(t));
  RttRun run = run_rtt_clients(o, profile, from_millis(t_ka_ms), estimators, duration);

  ExperimentResult res;
  res.name = "rtt-3level";
  const double settle = profile.period_s.value_or(0.0);
  const double last_from = duration - profile.period_s.value_or(duration);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    double err = 0.0, lo = kNan, hi = kNan;
    std::size_t count = 0;
    for (std::size_t r = 0; r < run.times_s.size(); ++r) {
      const double e = run.ewma[i][r];
      if (std::isnan(e)) continue;
      if (run.times_s[r] >= settle || settle >= duration) {
        err += std::abs(e - run.reference_ms[r]);
        ++count;
      }
      if (run.times_s[r] >= last_from) {
        lo = std::isnan(lo) ? e : std::min(lo, e);
        hi = std::isnan(hi) ? e : std::max(hi, e);
      }
    }
    res.summary.emplace_back(indexed("tau_s", i), taus[i]);
    res.summary.emplace_back(indexed("mean_abs_error_ms", i), count ? err / count : kNan);
    res.summary.emplace_back(indexed("ewma_min_ms", i), lo);
    res.summary.emplace_back(indexed("ewma_max_ms", i), hi);
  }
  res.tables.emplace_back("trace", rtt_table(run));
  res.log = std::move(run.log);
  return res;
}

bool not_later(double a, double b) {
  // NaN means "never reached".
  if (std::isnan(a)) return std::isnan(b);
  return std::isnan(b) || a <= b + 1e-9;
}

ExperimentResult rtt_asym(const ExperimentOptions& o) {
  const double t_ka_ms = t_ka_ms_of(o, 2000.0);
  const double t_ka_s = t_ka_ms / 1000.0;
  const double fast = tau_from_alpha(o.alphas.size() > 0 ? o.alphas[0] : 0.8, t_ka_s);
  const double slow = tau_from_alpha(o.alphas.size() > 1 ? o.alphas[1] : 0.2, t_ka_s);
  const ImpairmentProfile profile = pick_profile(o, "RTT-3LEVEL");
  const double duration = run_length(o, profile, 3, 60.0);
  const std::vector<EwmaConfig> estimators{
      EwmaConfig::symmetric(fast), EwmaConfig::symmetric(slow),
      EwmaConfig::asymmetric(fast, slow, WorseDirection::kIncrease)};
  RttRun run = run_rtt_clients(o, profile, from_millis(t_ka_ms), estimators, duration);

  const auto changes = rtt_changes(profile, duration);
  CurveTable reach;
  reach.columns = {"change_s", "from_ms", "to_ms", "reach_sym_fast_s", "reach_sym_slow_s",
                   "reach_asym_s"};
  int ups = 0, downs = 0, up_ok = 0, down_ok = 0;
  for (std::size_t c = 0; c < changes.size(); ++c) {
    const double until = c + 1 < changes.size() ? changes[c + 1].at_s : duration + 1.0;
    const double rf = reach_time(run, run.ewma[0], changes[c], until);
    const double rs = reach_time(run, run.ewma[1], changes[c], until);
    const double ra = reach_time(run, run.ewma[2], changes[c], until);
    reach.rows.push_back({changes[c].at_s, changes[c].from_ms, changes[c].to_ms, rf, rs, ra});
    if (changes[c].to_ms > changes[c].from_ms) {
      ++ups;
      up_ok += not_later(ra, rf);
    } else {
      ++downs;
      down_ok += not_later(rs, ra);
    }
  }
  ExperimentResult res;
  res.name = "rtt-asym";
  res.summary.emplace_back("tau_worse_s", fast);
  res.summary.emplace_back("tau_better_s", slow);
  res.summary.emplace_back("up_changes", ups);
  res.summary.emplace_back("down_changes", downs);
  res.summary.emplace_back("up_not_later", up_ok);
  res.summary.emplace_back("down_not_sooner", down_ok);
  res.summary.emplace_back("property_holds", (up_ok == ups && down_ok == downs) ? 1.0 : 0.0);
  CurveTable trace = rtt_table(run);
  trace.columns = {"time_s", "reference_rtt_ms", "raw_rtt_ms", "ewma_sym_fast_ms",
                   "ewma_sym_slow_ms", "ewma_asym_ms"};
  res.tables.emplace_back("trace", std::move(trace));
  res.tables.emplace_back("reach", std::move(reach));
  res.log = std::move(run.log);
  return res;
}

struct LossSeries {
  CurveTable table;
  double max_error = 0.0;
  double max_occurrence_error = 0.0;
};

// Steady value per segment: mean EWMA over [start + settle, end) across all
// repetitions, compared with the configured loss.
LossSeries loss_series(const std::vector<MeasurementRecord>& records,
                       const ImpairmentProfile& profile, Direction dir, double settle_s,
                       double duration_s, ExperimentResult& res, const std::string& prefix) {
  LossSeries out;
  out.table.columns = {"time_s", "reference", "raw", "ewma"};
  for (const auto& r : records) {
    const double t = to_seconds(r.time);
    out.table.rows.push_back({t, profile.loss(dir, t), r.raw, r.ewma});
  }
  const double period = profile.period_s.value_or(duration_s);
  const std::size_t nseg = profile.segments.size();
  std::vector<double> sum(nseg, 0.0);
  std::vector<std::size_t> count(nseg, 0);
  for (double base = 0.0; base < duration_s; base += period) {
    for (std::size_t i = 0; i < nseg; ++i) {
      const double from = base + profile.segments[i].start_s + settle_s;
      const double to =
          std::min(duration_s, base + (i + 1 < nseg ? profile.segments[i + 1].start_s : period));
      double occ_sum = 0.0;
      std::size_t occ_n = 0;
      for (const auto& r : records) {
        const double t = to_seconds(r.time);
        if (t >= from && t < to) {
          occ_sum += r.ewma;
          ++occ_n;
        }
      }
      if (occ_n == 0) continue;
      sum[i] += occ_sum;
      count[i] += occ_n;
      const double ref = dir == Direction::kClientToServer ? profile.segments[i].loss_up
                                                           : profile.segments[i].loss_down;
      out.max_occurrence_error =
          std::max(out.max_occurrence_error, std::abs(occ_sum / occ_n - ref) * 100.0);
    }
    if (!profile.period_s) break;
  }
  for (std::size_t i = 0; i < nseg; ++i) {
    const double ref = dir == Direction::kClientToServer ? profile.segments[i].loss_up
                                                         : profile.segments[i].loss_down;
    const double steady = count[i] ? sum[i] / count[i] : kNan;
    const double err_pp = std::abs(steady - ref) * 100.0;
    res.summary.emplace_back(indexed((prefix + ".reference").c_str(), i), ref);
    res.summary.emplace_back(indexed((prefix + ".steady").c_str(), i), steady);
    res.summary.emplace_back(indexed((prefix + ".error_pp").c_str(), i), err_pp);
    out.max_error = std::isnan(err_pp) ? kNan : std::max(out.max_error, err_pp);
  }
  res.summary.emplace_back(prefix + ".max_error_pp", out.max_error);
  res.summary.emplace_back(prefix + ".max_occurrence_error_pp", out.max_occurrence_error);
  return out;
}

ExperimentResult owl_3level(const ExperimentOptions& o) {
  const double t_ka_ms = t_ka_ms_of(o, 200.0);
  SessionConfig c;
  c.t_ka = from_millis(t_ka_ms);
  c.n = o.n.value_or(10);
  c.k = o.k.value_or(3);
  c.alpha = o.alphas.empty() ? 0.8 : o.alphas.front();
  c.validate();
  const double tau = c.metrics().owl.tau_up_s;
  const ImpairmentProfile profile = pick_profile(o, "LOSS-3LEVEL");
  const double duration = run_length(o, profile, 5, 300.0);
  const double rate = o.data_rate_pps < 0.0 ? 50.0 : o.data_rate_pps;

  EventLog log(o.log_format);
  MemorySink memory;
  TeeSink tee({&log.writer, &memory});
  SimNetwork net;
  Engine& server = net.add_engine(kServer, server_options(c), &tee);
  const Address client_addr = client_address(0);
  Engine& client = net.add_engine(client_addr, client_options(1), &tee);
  net.connect(client_addr, kServer, profile);
  const SessionId id = net.add_client(client_addr, kServer, c);
  // Synthetic data both ways, so loss counters see more than probes.
  const std::vector<std::uint8_t> payload(64, 0x5a);
  const Time gap = rate > 0.0 ? from_seconds(1.0 / rate) : Time::zero();
  std::function<void(Time)> tick = [&](Time now) {
    client.send_data(id, payload, now);
    if (auto sid = server.find(client_addr)) server.send_data(*sid, payload, now);
    net.schedule(now + gap, tick);
  };
  if (rate > 0.0) net.schedule(gap / 2, tick);
  drive(net, from_seconds(duration), o.wall_clock);

  ExperimentResult res;
  res.name = "owl-3level";
  const double settle = timeliness(tau);
  res.summary.emplace_back("owl_tau_s", tau);
  res.summary.emplace_back("timeliness_s", settle);
  res.summary.emplace_back("loss_interval_s", to_seconds(c.loss_interval()));
  res.summary.emplace_back("data_rate_pps", rate);
  std::vector<MeasurementRecord> up, down, rtl;
  for (const auto& m : memory.measurements()) {
    if (m.metric == Metric::kOwlClient) up.push_back(m);
    if (m.metric == Metric::kOwlServer) down.push_back(m);
    if (m.metric == Metric::kRtl) rtl.push_back(m);
  }
  LossSeries a = loss_series(up, profile, Direction::kClientToServer, settle, duration, res,
                             "owl_c");
  LossSeries b = loss_series(down, profile, Direction::kServerToClient, settle, duration, res,
                             "owl_s");
  CurveTable rtl_table;
  rtl_table.columns = {"time_s", "reference", "raw", "ewma"};
  for (const auto& r : rtl) {
    const double t = to_seconds(r.time);
    rtl_table.rows.push_back({t,
                              rtl_combine(profile.loss(Direction::kClientToServer, t),
                                          profile.loss(Direction::kServerToClient, t)),
                              r.raw, r.ewma});
  }
  res.tables.emplace_back("owl_c", std::move(a.table));
  res.tables.emplace_back("owl_s", std::move(b.table));
  res.tables.emplace_back("rtl", std::move(rtl_table));
  res.log = log.str();
  return res;
}

FaultDirection parse_fault_direction(const std::string& s, bool& random) {
  random = s.empty() || s == "random";
  if (random || s == "both") return FaultDirection::kBoth;
  if (s == "up") return FaultDirection::kUp;
  if (s == "down") return FaultDirection::kDown;
  throw InputError("fault direction must be random, up, down or both");
}

ExperimentResult fault_detect(const ExperimentOptions& o) {
  const double t_ka_ms = t_ka_ms_of(o, 60.0);
  const int k = o.k.value_or(7);
  const double rtt = o.rtt_ms.value_or(100.0);
  const std::uint64_t trials = o.trials.value_or(10000);
  if (rtt < 0.0) throw InputError("rtt must be non-negative");
  bool random_dir = false;
  const FaultDirection fixed = parse_fault_direction(o.fault_direction, random_dir);

  SessionConfig c;
  c.t_ka = from_millis(t_ka_ms);
  c.k = k;
  c.n = o.n.value_or(10);
  c.validate();
  const Responsiveness bound = responsiveness(k, t_ka_ms, rtt, rtt);
  const double t_to = k * t_ka_ms;
  const double warmup_s = std::max(1.0, 3.0 * (t_ka_ms + rtt) / 1000.0);
  const double span_s = std::ceil(warmup_s + (t_ka_ms + bound.worst_ms) / 1000.0 + 1.0);

  EventLog log(o.log_format);
  StatusOnly log_status(log.writer);
  std::mt19937_64 rng(o.seed);
  std::vector<double> delays;
  CurveTable per_trial;
  per_trial.columns = {"trial", "direction", "fault_phase_ms", "delay_ms"};
  std::uint64_t violations = 0, undetected = 0;
  double sum_dir[2] = {0, 0};
  std::uint64_t n_dir[2] = {0, 0};

  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    const Time start = from_seconds(span_s * static_cast<double>(trial));
    const double phase_s = uniform01(rng) * t_ka_ms / 1000.0;
    FaultDirection dir = fixed;
    if (random_dir) dir = uniform01(rng) < 0.5 ? FaultDirection::kUp : FaultDirection::kDown;
    ImpairmentProfile profile = constant_profile(rtt, o.p_loss.value_or(0.0),
                                                 o.p_loss.value_or(0.0));
    profile.seed = o.seed + trial;
    profile.fault_at_s = warmup_s + phase_s;
    profile.fault_direction = dir;

    MemorySink statuses;
    TeeSink tee({&log_status, &statuses});
    SimNetwork net(start);
    net.add_engine(kServer, server_options(c), &log_status);
    const Address a = client_address(0);
    net.add_engine(a, client_options(1), &tee);
    net.connect(a, kServer, profile);
    net.add_client(a, kServer, c);
    const Time fault = start + from_seconds(*profile.fault_at_s);
    drive(net, start + from_seconds(span_s) - 1ms, o.wall_clock);

    double delay = kNan;
    bool false_down = false;
    for (const auto& s : statuses.statuses()) {
      if (s.to != LinkStatus::kDown) continue;
      if (s.time < fault) {
        false_down = true;
        continue;
      }
      delay = to_millis(s.time - fault);
      break;
    }
    const int di = dir == FaultDirection::kDown ? 1 : 0;
    per_trial.rows.push_back({static_cast<double>(trial), static_cast<double>(di),
                              phase_s * 1000.0, delay});
    if (std::isnan(delay)) {
      ++undetected;
      ++violations;
      continue;
    }
    if (false_down || delay > bound.worst_ms + 1e-9 || delay < t_to - 1e-9) ++violations;
    delays.push_back(delay);
    sum_dir[di] += delay;
    ++n_dir[di];
  }

  ExperimentResult res;
  res.name = "fault-detect";
  double sum = 0.0, lo = kNan, hi = kNan;
  for (double d : delays) {
    sum += d;
    lo = std::isnan(lo) ? d : std::min(lo, d);
    hi = std::isnan(hi) ? d : std::max(hi, d);
  }
  const double mean = delays.empty() ? kNan : sum / delays.size();
  res.summary.emplace_back("trials", static_cast<double>(trials));
  res.summary.emplace_back("k", k);
  res.summary.emplace_back("t_ka_ms", t_ka_ms);
  res.summary.emplace_back("rtt_ms", rtt);
  res.summary.emplace_back("timeout_ms", t_to);
  res.summary.emplace_back("bound_max_ms", bound.worst_ms);
  res.summary.emplace_back("predicted_mean_ms", bound.average_ms);
  res.summary.emplace_back("mean_ms", mean);
  res.summary.emplace_back("min_ms", lo);
  res.summary.emplace_back("max_ms", hi);
  res.summary.emplace_back("mean_rel_error", (mean - bound.average_ms) / bound.average_ms);
  res.summary.emplace_back("mean_up_ms", n_dir[0] ? sum_dir[0] / n_dir[0] : kNan);
  res.summary.emplace_back("mean_down_ms", n_dir[1] ? sum_dir[1] / n_dir[1] : kNan);
  res.summary.emplace_back("undetected", static_cast<double>(undetected));
  res.summary.emplace_back("violations", static_cast<double>(violations));

  CurveTable hist;
  hist.columns = {"bin_start_ms", "count"};
  std::map<long long, std::uint64_t> bins;
  for (double d : delays) ++bins[static_cast<long long>(std::floor(d / 10.0)) * 10];
  for (const auto& [b, n] : bins) hist.rows.push_back({static_cast<double>(b), double(n)});
  res.tables.emplace_back("histogram", std::move(hist));
  res.tables.emplace_back("trials", std::move(per_trial));
  res.log = log.str();
  return res;
}

// Request acknowledgements observed on the wire of one client/server pair.
struct AckTrace {
  std::vector<bool> acked;
  std::unordered_map<std::uint32_t, std::size_t> by_tsc;
};

ExperimentResult fpev_montecarlo(const ExperimentOptions& o) {
  const double t_ka_ms = t_ka_ms_of(o, 100.0);
  const double rtt = o.rtt_ms.value_or(20.0);
  const double p = o.p_loss.value_or(0.05);
  const std::uint64_t epochs = o.trials.value_or(1000000);
  const std::vector<int> ks = o.ks.empty() ? std::vector<int>{1, 2, 3} : o.ks;
  if (!(rtt >= 0.0 && rtt < t_ka_ms)) {
    throw InputError("false-positive harness requires RTT < T_KA");
  }
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("loss must lie in [0, 1]");
  if (epochs < 1000) throw InputError("need at least 1000 epochs");
  const int kmax = *std::max_element(ks.begin(), ks.end());
  if (*std::min_element(ks.begin(), ks.end()) < 1) throw InputError("K must be >= 1");

  SessionConfig c;
  c.t_ka = from_millis(t_ka_ms);
  c.k = kmax;
  c.n = o.n.value_or(10);
  EventLog log(o.log_format);
  StatusOnly log_status(log.writer);
  SimNetwork net;
  net.add_engine(kServer, server_options(c), &log_status);
  const Address a = client_address(0);
  net.add_engine(a, client_options(1), &log_status);
  ImpairmentProfile profile = constant_profile(rtt, p, p);
  profile.seed = o.seed;
  net.connect(a, kServer, profile);

  AckTrace acks;
  acks.acked.reserve(epochs + 8);
  net.set_trace([&](const TraceEvent& ev) {
    if (ev.kind == FrameKind::kProbeRequest) {
      const ProbeBody body = decode_probe(ev.bytes);
      acks.by_tsc[body.tsc] = acks.acked.size();
      acks.acked.push_back(false);
      if (!ev.deliver_at) acks.by_tsc.erase(body.tsc);
    } else if (ev.kind == FrameKind::kProbeResponse && ev.deliver_at) {
      const ProbeBody body = decode_probe(ev.bytes);
      if (auto it = acks.by_tsc.find(body.tsc); it != acks.by_tsc.end()) {
        acks.acked[it->second] = true;
      }
    }
  });
  const SessionId id = net.add_client(a, kServer, c);
  // Requests go out at 0, T_KA, ...; the last one needs one more RTT.
  const Time end = from_millis(t_ka_ms) * static_cast<long long>(epochs - 1) +
                   from_millis(rtt) + 1ms;
  drive(net, end, o.wall_clock);
  const Engine& client = net.engine(a);
  std::uint64_t downs = 0;
  if (const ConnectivityMonitor* m = client.monitor(id)) {
    for (const auto& t : m->transitions()) downs += t.to == LinkStatus::kDown;
  }

  const std::size_t n = std::min<std::size_t>(acks.acked.size(), epochs);
  ExperimentResult res;
  res.name = "fpev-montecarlo";
  res.summary.emplace_back("p_loss", p);
  res.summary.emplace_back("epochs", static_cast<double>(n));
  res.summary.emplace_back("t_ka_ms", t_ka_ms);
  res.summary.emplace_back("rtt_ms", rtt);
  res.summary.emplace_back("down_transitions", static_cast<double>(downs));
  CurveTable table;
  table.columns = {"K", "p_hat", "std_error", "expected", "z"};
  bool all_ok = true;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const int k = ks[ki];
    // Batch means over consecutive epochs; windows overlap, so single
    // epochs are not independent.
    const std::size_t batches = 1000;
    const std::size_t first = static_cast<std::size_t>(k - 1);
    const std::size_t usable = n - first;
    const std::size_t per_batch = usable / batches;
    std::size_t run = 0;
    std::vector<double> batch_hits(batches, 0.0);
    double hits = 0.0;
    std::size_t counted = 0;
    for (std::size_t j = 0; j < n; ++j) {
      run = acks.acked[j] ? 0 : run + 1;
      if (j < first) continue;
      const std::size_t e = j - first;
      if (e >= per_batch * batches) break;
      const bool all_lost = run >= static_cast<std::size_t>(k);
      hits += all_lost;
      batch_hits[e / per_batch] += all_lost;
      ++counted;
    }
    const double p_hat = hits / counted;
    double var = 0.0;
    for (double b : batch_hits) {
      const double m = b / per_batch;
      var += (m - p_hat) * (m - p_hat);
    }
    var /= (batches - 1);
    const double se = std::sqrt(var / batches);
    const double expected = false_positive_prob(p, k);
    const double z = se > 0.0 ? (p_hat - expected) / se : (p_hat == expected ? 0.0 : kNan);
    if (!(std::abs(z) <= 3.0)) all_ok = false;
    table.rows.push_back({double(k), p_hat, se, expected, z});
    res.summary.emplace_back(indexed("p_hat", ki), p_hat);
    res.summary.emplace_back(indexed("std_error", ki), se);
    res.summary.emplace_back(indexed("expected", ki), expected);
    res.summary.emplace_back(indexed("z", ki), z);
  }
  res.summary.emplace_back("all_within_3se", all_ok ? 1.0 : 0.0);
  res.tables.emplace_back("window", std::move(table));
  res.log = log.str();
  return res;
}

ExperimentResult rtl_montecarlo(const ExperimentOptions& o) {
  const double t_ka_ms = t_ka_ms_of(o, 100.0);
  const double rtt = o.rtt_ms.value_or(20.0);
  const double p = o.p_loss.value_or(0.05);
  const std::uint64_t probes = o.trials.value_or(100000);
  if (probes < 100) throw InputError("need at least 100 probes");
  SessionConfig c;
  c.t_ka = from_millis(t_ka_ms);
  c.n = o.n.value_or(10);
  c.k = o.k.value_or(3);
  EventLog log(o.log_format);
  StatusOnly log_status(log.writer);
  MemorySink memory;
  TeeSink tee({&log_status, &memory});
  SimNetwork net;
  net.add_engine(kServer, server_options(c), &log_status);
  const Address a = client_address(0);
  net.add_engine(a, client_options(1), &tee);
  ImpairmentProfile profile = constant_profile(rtt, p, p);
  profile.seed = o.seed;
  net.connect(a, kServer, profile);
  const SessionId id = net.add_client(a, kServer, c);
  drive(net, from_millis(t_ka_ms) * static_cast<long long>(probes - 1) + from_millis(rtt) + 1ms,
        o.wall_clock);

  std::vector<double> samples;
  for (const auto& m : memory.measurements(Metric::kRtl)) samples.push_back(m.raw);
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= std::max<std::size_t>(1, samples.size());
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  var /= std::max<std::size_t>(2, samples.size()) - 1;
  const double se = std::sqrt(var / std::max<std::size_t>(1, samples.size()));
  const double expected = rtl_combine(p, p);
  const ClientSession* cs = net.engine(a).client(id);

  ExperimentResult res;
  res.name = "rtl-montecarlo";
  res.summary.emplace_back("p_loss", p);
  res.summary.emplace_back("probes", static_cast<double>(cs->requests_sent()));
  res.summary.emplace_back("samples", static_cast<double>(samples.size()));
  res.summary.emplace_back("mean_rtl", mean);
  res.summary.emplace_back("std_error", se);
  res.summary.emplace_back("expected", expected);
  res.summary.emplace_back("z", se > 0.0 ? (mean - expected) / se : kNan);
  res.summary.emplace_back(
      "pooled_rtl", 1.0 - static_cast<double>(cs->responses_received()) / cs->requests_sent());
  CurveTable t;
  t.columns = {"interval", "rtl"};
  for (std::size_t i = 0; i < samples.size(); ++i) t.rows.push_back({double(i), samples[i]});
  res.tables.emplace_back("samples", std::move(t));
  res.log = log.str();
  return res;
}

using Runner = ExperimentResult (*)(const ExperimentOptions&);
const std::pair<const char*, Runner> kExperiments[] = {
    {"rtt-step", rtt_step},
    {"rtt-3level", rtt_3level},
    {"rtt-asym", rtt_asym},
    {"owl-3level", owl_3level},
    {"fault-detect", fault_detect},
    {"fpev-montecarlo", fpev_montecarlo},
    {"rtl-montecarlo", rtl_montecarlo},
};

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double ExperimentResult::value(std::string_view key) const {
  for (const auto& [k, v] : summary) {
    if (k == key) return v;
  }
  throw InputError("no summary value '" + std::string(key) + "'");
}

const CurveTable& ExperimentResult::table(std::string_view key) const {
  for (const auto& [k, t] : tables) {
    if (k == key) return t;
  }
  throw InputError("no table '" + std::string(key) + "'");
}

std::string ExperimentResult::summary_text() const {
  std::string out = "experiment=" + name + "\n";
  for (const auto& [k, v] : summary) out += k + "=" + format_value(v) + "\n";
  return out;
}

ExperimentResult run_experiment(std::string_view name, const ExperimentOptions& options) {
  for (const auto& [n, run] : kExperiments) {
    if (name == n) return run(options);
  }
  throw UnknownExperimentError("unknown experiment '" + std::string(name) + "'");
}

std::vector<std::string> experiment_names() {
  std::vector<std::string> out;
  for (const auto& [n, run] : kExperiments) out.emplace_back(n);
  return out;
}

std::vector<std::string> write_experiment(const ExperimentResult& result,
                                          const std::string& dir, LogFormat format) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir + ": " + ec.message());
  std::vector<std::string> paths;
  auto put = [&](const std::string& file, const std::string& text) {
    const std::string path = (fs::path(dir) / file).string();
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw InputError("cannot write " + path);
    paths.push_back(path);
  };
  put(result.name + "_events." + log_format_name(format), result.log);
  put(result.name + "_summary.txt", result.summary_text());
  for (const auto& [k, t] : result.tables) put(result.name + "_" + k + ".csv", t.to_csv());
  return paths;
}

}  // namespace kaprobe
