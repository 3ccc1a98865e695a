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

// kaprobe command-line front end. Talks to the library through the C API only.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kaprobe.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitInfeasible = 3;

std::atomic<kap_daemon*> g_daemon{nullptr};
std::atomic<kap_relay*> g_relay{nullptr};

extern "C" void on_signal(int) {
  if (kap_daemon* d = g_daemon.load()) kap_daemon_stop(d);
  if (kap_relay* r = g_relay.load()) kap_relay_stop(r);
}

void install_signals() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

int exit_code(kap_status st) {
  switch (st) {
    case KAP_OK:
      return kExitOk;
    case KAP_ERR_BIND:
    case KAP_ERR_TRANSPORT:
    case KAP_ERR_INTERNAL:
      return kExitRuntime;
    default:
      return kExitInput;
  }
}

int report(kap_status st) {
  std::cerr << "kaprobe: " << kap_status_name(st) << ": " << kap_last_error() << "\n";
  return exit_code(st);
}

// Runs a sized-buffer query twice: once for the size, once for the data.
template <typename F>
kap_status fetch(std::string& out, F&& call) {
  size_t needed = 0;
  kap_status st = call(nullptr, 0, &needed);
  if (st != KAP_OK) return st;
  std::vector<char> buf(needed);
  st = call(buf.data(), buf.size(), &needed);
  if (st == KAP_OK) out.assign(buf.data(), needed ? needed - 1 : 0);
  return st;
}

struct ConfigDeleter {
  void operator()(kap_config* c) const { kap_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<kap_config, ConfigDeleter>;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log_format;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "RNG seed");
  app->add_option("--log-format", c.log_format, "Log format")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  app->add_option("--out", c.out, "Output path ('-' for stdout)");
}

// Flags that map one-to-one onto configuration keys.
struct KeyFlag {
  const char* flag;
  const char* key;
  const char* help;
};

const KeyFlag kDaemonFlags[] = {
    {"--bind", "bind", "Local probe address ip:port (data uses port+1)"},
    {"--duration", "duration_s", "Run time in seconds, 0 runs until signalled"},
    {"--control-port", "control_port", "Loopback control port, 0 disables"},
    {"--t-ka", "t_ka_ms", "Keep-alive period in ms"},
    {"-k,--k", "k", "Consecutive losses declaring the path down"},
    {"-n,--n", "n", "Loss interval as a multiple of T_KA"},
    {"--alpha", "alpha", "EWMA smoothing factor"},
    {"--rtt-tau", "rtt_tau_s", "RTT time constant in s"},
    {"--owl-tau", "owl_tau_s", "OWL time constant in s"},
    {"--rtl-tau", "rtl_tau_s", "RTL time constant in s"},
    {"--rtt-tau-worse", "rtt_tau_worse_s", "Asymmetric RTT time constant for increases"},
    {"--rtt-tau-better", "rtt_tau_better_s", "Asymmetric RTT time constant for decreases"},
    {"--piggyback", "piggyback", "Active piggybacking on|off"},
    {"--mtu-budget", "mtu_budget", "Largest framed datagram in bytes"},
    {"--data-rate", "data_rate_pps", "Synthetic data packets per second per session"},
    {"--data-size", "data_size", "Synthetic data payload size in bytes"},
};

struct DaemonArgs {
  Common common;
  std::vector<std::string> peers;
  std::vector<std::string> sets;
  std::map<std::string, std::string> values;
  bool accept_unknown = true;
};

void add_key_flags(CLI::App* app, DaemonArgs& a, const KeyFlag* begin, const KeyFlag* end) {
  for (const KeyFlag* f = begin; f != end; ++f) {
    app->add_option_function<std::string>(
        f->flag, [&a, key = std::string(f->key)](const std::string& v) { a.values[key] = v; },
        f->help);
  }
  app->add_option("--set", a.sets, "Extra key=value configuration override");
}

kap_status build_config(const Common& c, const DaemonArgs* a, ConfigPtr& out) {
  kap_config* raw = nullptr;
  kap_status st = c.config.empty() ? kap_config_create(&raw) : kap_config_load(c.config.c_str(), &raw);
  if (st != KAP_OK) return st;
  out.reset(raw);
  auto set = [&](const std::string& k, const std::string& v) {
    return kap_config_set(raw, k.c_str(), v.c_str());
  };
  if (c.seed && (st = set("seed", std::to_string(*c.seed))) != KAP_OK) return st;
  if (!c.log_format.empty() && (st = set("log_format", c.log_format)) != KAP_OK) return st;
  if (!c.out.empty() && (st = set("out", c.out)) != KAP_OK) return st;
  if (!a) return KAP_OK;
  for (const auto& [k, v] : a->values) {
    if ((st = set(k, v)) != KAP_OK) return st;
  }
  for (const auto& kv : a->sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "kaprobe: --set expects key=value, got '" << kv << "'\n";
      return KAP_ERR_CONFIG;
    }
    if ((st = set(kv.substr(0, eq), kv.substr(eq + 1))) != KAP_OK) return st;
  }
  for (const auto& p : a->peers) {
    if ((st = kap_config_add_peer(raw, p.c_str())) != KAP_OK) return st;
  }
  return KAP_OK;
}

int run_daemon(const char* verb, DaemonArgs& a) {
  ConfigPtr cfg;
  kap_status st = build_config(a.common, &a, cfg);
  if (st == KAP_OK && !a.accept_unknown) st = kap_config_set(cfg.get(), "accept_unknown", "false");
  if (st != KAP_OK) return report(st);
  if (kap_config_get(cfg.get(), "out", nullptr, 0, nullptr) != KAP_OK) {
    kap_config_set(cfg.get(), "out", "-");
  }
  kap_daemon* d = nullptr;
  if ((st = kap_daemon_create(cfg.get(), verb, &d)) != KAP_OK) return report(st);
  uint16_t probe = 0, control = 0;
  kap_daemon_port(d, &probe, &control);
  std::cerr << "kaprobe " << verb << ": probe port " << probe << ", data port " << probe + 1;
  if (control) std::cerr << ", control port " << control;
  std::cerr << "\n";
  g_daemon.store(d);
  st = kap_daemon_run(d);
  g_daemon.store(nullptr);
  kap_daemon_stats s{};
  kap_daemon_stats_get(d, &s);
  kap_daemon_destroy(d);
  if (st != KAP_OK) return report(st);
  std::cerr << "kaprobe " << verb << ": sessions=" << s.sessions << " frames_in=" << s.frames_in
            << " explicit_requests=" << s.explicit_requests
            << " piggybacked_requests=" << s.piggybacked_requests
            << " explicit_responses=" << s.explicit_responses
            << " piggybacked_responses=" << s.piggybacked_responses
            << " data_sent=" << s.data_sent << " data_received=" << s.data_received
            << " malformed=" << s.malformed_frames << " send_errors=" << s.send_errors
            << " log_records=" << s.log_records << " log_dropped=" << s.log_dropped << "\n";
  return kExitOk;
}

struct RelayArgs {
  Common common;
  std::string listen, upstream, profile;
  std::optional<double> duration;
};

int run_relay(RelayArgs& a) {
  ConfigPtr cfg;
  kap_status st = build_config(a.common, nullptr, cfg);
  auto set = [&](const char* k, const std::string& v) {
    if (st == KAP_OK && !v.empty()) st = kap_config_set(cfg.get(), k, v.c_str());
  };
  set("listen", a.listen);
  set("upstream", a.upstream);
  set("profile", a.profile);
  if (a.duration) set("duration_s", std::to_string(*a.duration));
  if (st != KAP_OK) return report(st);
  kap_relay* r = nullptr;
  if ((st = kap_relay_create(cfg.get(), &r)) != KAP_OK) return report(st);
  uint16_t port = 0;
  kap_relay_port(r, &port);
  std::cerr << "kaprobe relay: listening on probe port " << port << "\n";
  g_relay.store(r);
  st = kap_relay_run(r);
  g_relay.store(nullptr);
  kap_relay_stats s{};
  kap_relay_stats_get(r, &s);
  kap_relay_destroy(r);
  if (st != KAP_OK) return report(st);
  std::cerr << "kaprobe relay: clients=" << s.clients << " up=" << s.forwarded_up << "/"
            << s.dropped_up << " down=" << s.forwarded_down << "/" << s.dropped_down
            << " (forwarded/dropped)\n";
  return kExitOk;
}

struct PlanArgs {
  Common common;
  kap_plan_input input{};
  bool worst_case = false;
  std::string sweep;
  double sweep_t_ka = -1.0;
};

int run_plan(PlanArgs& a) {
  a.input.worst_case = a.worst_case ? 1 : 0;
  kap_plan_result r{};
  kap_status st = kap_plan_solve(&a.input, &r);
  if (st != KAP_OK) return report(st);
  if (r.feasible) {
    std::printf("feasible=1\nk_star=%d\nt_ka_star_ms=%.6g\nt_ka_operational_ms=%.6g\n"
                "p_fp=%.6g\nt_fp_s=%.6g\nt_ravg_ms=%.6g\nt_rmax_ms=%.6g\n",
                r.k_star, r.t_ka_star_ms, r.t_ka_operational_ms, r.p_fp, r.t_fp_s, r.t_ravg_ms,
                r.t_rmax_ms);
  } else {
    std::printf("feasible=0\ninfeasible: no K <= %d meets both targets\n", a.input.k_max);
  }
  if (!a.sweep.empty()) {
    std::string csv;
    st = fetch(csv, [&](char* o, size_t c, size_t* n) {
      return kap_plan_sweep_csv(&a.input, a.sweep.c_str(), a.sweep_t_ka, o, c, n);
    });
    if (st != KAP_OK) return report(st);
    if (a.common.out.empty() || a.common.out == "-") {
      std::fputs(csv.c_str(), stdout);
    } else {
      std::ofstream f(a.common.out, std::ios::binary | std::ios::trunc);
      f << csv;
      if (!f) {
        std::cerr << "kaprobe: cannot write " << a.common.out << "\n";
        return kExitInput;
      }
    }
  }
  return r.feasible ? kExitOk : kExitInfeasible;
}

struct ExperimentArgs {
  Common common;
  std::string name;
  bool list = false;
  std::optional<double> t_ka, duration, rtt, p_loss, data_rate;
  std::optional<int> k, n;
  std::optional<std::int64_t> trials;
  std::vector<double> alphas, taus;
  std::vector<int> ks;
  std::string profile, fault_direction;
  bool wall_clock = false;
};

template <typename T, typename U>
bool copy_list(const std::vector<T>& from, U* to, size_t& count, const char* what) {
  if (from.size() > KAP_MAX_LIST) {
    std::cerr << "kaprobe: at most " << KAP_MAX_LIST << " values for " << what << "\n";
    return false;
  }
  for (size_t i = 0; i < from.size(); ++i) to[i] = from[i];
  count = from.size();
  return true;
}

int run_experiment(ExperimentArgs& a) {
  if (a.list || a.name.empty()) {
    std::string names;
    kap_status st = fetch(names, [](char* o, size_t c, size_t* n) {
      return kap_experiment_names(o, c, n);
    });
    if (st != KAP_OK) return report(st);
    std::fputs(names.c_str(), stdout);
    return a.list ? kExitOk : kExitInput;
  }
  kap_experiment_options o;
  kap_experiment_options_default(&o);
  if (a.common.seed) o.seed = *a.common.seed;
  o.log_jsonl = a.common.log_format == "jsonl";
  if (a.t_ka) o.t_ka_ms = *a.t_ka;
  if (a.k) o.k = *a.k;
  if (a.n) o.n = *a.n;
  if (a.trials) o.trials = *a.trials;
  if (a.duration) o.duration_s = *a.duration;
  if (a.rtt) o.rtt_ms = *a.rtt;
  if (a.p_loss) o.p_loss = *a.p_loss;
  if (a.data_rate) o.data_rate_pps = *a.data_rate;
  if (!copy_list(a.alphas, o.alphas, o.alpha_count, "--alpha") ||
      !copy_list(a.taus, o.taus_s, o.tau_count, "--tau") ||
      !copy_list(a.ks, o.ks, o.k_count, "--ks")) {
    return kExitInput;
  }
  if (!a.profile.empty()) o.profile = a.profile.c_str();
  if (!a.fault_direction.empty()) o.fault_direction = a.fault_direction.c_str();
  o.wall_clock = a.wall_clock ? 1 : 0;

  kap_experiment* e = nullptr;
  const auto t0 = std::chrono::steady_clock::now();
  kap_status st = kap_experiment_run(a.name.c_str(), &o, &e);
  if (st != KAP_OK) return report(st);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string summary, files;
  st = fetch(summary, [&](char* b, size_t c, size_t* n) {
    return kap_experiment_summary(e, b, c, n);
  });
  const std::string dir = a.common.out.empty() ? "." : a.common.out;
  if (st == KAP_OK) {
    st = fetch(files, [&](char* b, size_t c, size_t* n) {
      return kap_experiment_write(e, dir.c_str(), b, c, n);
    });
  }
  kap_experiment_destroy(e);
  if (st != KAP_OK) return report(st);
  std::fputs(summary.c_str(), stdout);
  std::fprintf(stderr, "kaprobe experiment %s: %.3f s, wrote:\n%s", a.name.c_str(), elapsed,
               files.c_str());
  return kExitOk;
}

struct BenchArgs {
  Common common;
  kap_bench_options options{};
};

int run_bench(BenchArgs& a) {
  kap_bench_report r{};
  std::string text;
  kap_status st = fetch(text, [&](char* o, size_t c, size_t* n) {
    return kap_bench_run(&a.options, &r, o, c, n);
  });
  if (st != KAP_OK) return report(st);
  if (r.empty) text = "empty=1\n";
  if (a.common.out.empty() || a.common.out == "-") {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream f(a.common.out, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) {
      std::cerr << "kaprobe: cannot write " << a.common.out << "\n";
      return kExitInput;
    }
  }
  return kExitOk;
}

int run_control(std::uint16_t port, const std::vector<std::string>& words) {
  std::string cmd;
  for (const auto& w : words) cmd += (cmd.empty() ? "" : " ") + w;
  // One call only: each call sends the command again.
  std::vector<char> buf(KAP_CONTROL_REPLY_MAX);
  size_t needed = 0;
  kap_status st = kap_control_send(port, cmd.c_str(), buf.data(), buf.size(), &needed);
  if (st != KAP_OK) return report(st);
  const std::string reply(buf.data());
  std::fputs(reply.c_str(), stdout);
  if (!reply.empty() && reply.back() != '\n') std::fputc('\n', stdout);
  return reply.rfind("error", 0) == 0 ? kExitInput : kExitOk;
}

int run_profile(const std::string& name) {
  std::string text;
  kap_status st = name.empty()
                      ? fetch(text, [](char* o, size_t c, size_t* n) {
                          return kap_profile_names(o, c, n);
                        })
                      : fetch(text, [&](char* o, size_t c, size_t* n) {
                          return kap_profile_describe(name.c_str(), o, c, n);
                        });
  if (st != KAP_OK) return report(st);
  std::fputs(text.c_str(), stdout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kaprobe: keep-alive path monitoring probes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kap_version());

  DaemonArgs server_args, client_args;
  auto* server = app.add_subcommand("server", "Answer probes from any number of clients");
  add_common(server, server_args.common);
  add_key_flags(server, server_args, std::begin(kDaemonFlags), std::end(kDaemonFlags));
  server->add_flag("!--reject-unknown", server_args.accept_unknown,
                   "Ignore probes from peers that were not configured");

  auto* client = app.add_subcommand("client", "Probe one or more servers");
  add_common(client, client_args.common);
  add_key_flags(client, client_args, std::begin(kDaemonFlags), std::end(kDaemonFlags));
  client->add_option("--peer", client_args.peers, "Server probe address ip:port");

  RelayArgs relay_args;
  auto* relay = app.add_subcommand("relay", "Forward probe traffic through an impairment profile");
  add_common(relay, relay_args.common);
  relay->add_option("--listen", relay_args.listen, "Address clients send to");
  relay->add_option("--upstream", relay_args.upstream, "Server probe address");
  relay->add_option("--profile", relay_args.profile, "Profile name or file");
  relay->add_option("--duration", relay_args.duration, "Run time in seconds");

  PlanArgs plan_args;
  kap_plan_input_default(&plan_args.input);
  auto* plan = app.add_subcommand("plan", "Choose K and T_KA for loss, responsiveness and false-positive targets");
  add_common(plan, plan_args.common);
  plan->add_option("--p-loss", plan_args.input.p_loss, "Per-direction loss fraction")
      ->capture_default_str();
  plan->add_option("--rtt-avg", plan_args.input.rtt_avg_ms, "Average RTT in ms")
      ->capture_default_str();
  plan->add_option("--rtt-max", plan_args.input.rtt_max_ms, "Maximum RTT in ms for --worst-case");
  plan->add_option("--t-ravg-max", plan_args.input.t_ravg_max_ms,
                   "Responsiveness target in ms")
      ->capture_default_str();
  plan->add_option("--t-fp-min", plan_args.input.t_fp_min_s,
                   "Minimum mean interval between false positives in s")
      ->capture_default_str();
  plan->add_option("--t-ka-min", plan_args.input.t_ka_min_ms, "Smallest allowed T_KA in ms")
      ->capture_default_str();
  plan->add_option("--k-max", plan_args.input.k_max, "Largest K considered")
      ->capture_default_str();
  plan->add_option("--granularity", plan_args.input.granularity_ms, "Timer step in ms")
      ->capture_default_str();
  plan->add_flag("--worst-case", plan_args.worst_case, "Bound the worst-case detection time");
  plan->add_option("--sweep", plan_args.sweep,
                   "Sweep <var>:<from>:<to>[:<points>[:log]], var in K,p_loss,t_fp_min,t_ravg_max");
  plan->add_option("--sweep-t-ka", plan_args.sweep_t_ka, "T_KA in ms held fixed for a K sweep");

  ExperimentArgs exp_args;
  auto* experiment = app.add_subcommand("experiment", "Run a named in-process experiment");
  add_common(experiment, exp_args.common);
  experiment->add_option("name", exp_args.name, "Experiment name");
  experiment->add_flag("--list", exp_args.list, "List experiment names");
  experiment->add_option("--t-ka", exp_args.t_ka, "Keep-alive period in ms");
  experiment->add_option("-k,--k", exp_args.k, "Consecutive losses declaring the path down");
  experiment->add_option("-n,--n", exp_args.n, "Loss interval as a multiple of T_KA");
  experiment->add_option("--alpha", exp_args.alphas, "EWMA smoothing factors");
  experiment->add_option("--tau", exp_args.taus, "EWMA time constants in s");
  experiment->add_option("--trials", exp_args.trials, "Trial or epoch count");
  experiment->add_option("--duration", exp_args.duration, "Length in s");
  experiment->add_option("--rtt", exp_args.rtt, "Round-trip delay in ms");
  experiment->add_option("--p-loss", exp_args.p_loss, "Per-direction loss fraction");
  experiment->add_option("--ks", exp_args.ks, "K values for fpev-montecarlo");
  experiment->add_option("--profile", exp_args.profile, "Profile name or file");
  experiment->add_option("--fault-direction", exp_args.fault_direction,
                         "Fault direction for fault-detect")
      ->check(CLI::IsMember({"random", "up", "down", "both"}));
  experiment->add_option("--data-rate", exp_args.data_rate, "Synthetic data packets per second");
  experiment->add_flag("--wall-clock", exp_args.wall_clock, "Pace the run in real time");

  BenchArgs bench_args;
  kap_bench_options_default(&bench_args.options);
  auto* bench = app.add_subcommand("bench", "Measure engine throughput and deadline accuracy");
  add_common(bench, bench_args.common);
  bench->add_option("--sessions", bench_args.options.sessions, "Concurrent client sessions")
      ->capture_default_str();
  bench->add_option("--t-ka", bench_args.options.t_ka_ms, "Keep-alive period in ms")
      ->capture_default_str();
  bench->add_option("--duration", bench_args.options.duration_s, "Paced run length in s, 0 for an empty report")
      ->capture_default_str();
  bench->add_option("--flood", bench_args.options.flood_s, "Unpaced flood length in s")
      ->capture_default_str();

  std::uint16_t control_port = 0;
  std::vector<std::string> control_words;
  auto* control = app.add_subcommand("control", "Send a command to a running daemon");
  control->add_option("--port", control_port, "Daemon control port")->required();
  control->add_option("command", control_words, "list | add <addr> [k=v] | remove <id> | "
                                                "piggyback <id> on|off | stats | stop")
      ->required();

  std::string profile_name;
  auto* profile = app.add_subcommand("profile", "List built-in profiles or print one");
  profile->add_option("name", profile_name, "Profile name or file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  install_signals();
  if (*server) return run_daemon("server", server_args);
  if (*client) return run_daemon("client", client_args);
  if (*relay) return run_relay(relay_args);
  if (*plan) return run_plan(plan_args);
  if (*experiment) return run_experiment(exp_args);
  if (*bench) return run_bench(bench_args);
  if (*control) return run_control(control_port, control_words);
  if (*profile) return run_profile(profile_name);
  return kExitInput;
}
