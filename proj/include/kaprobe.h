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

/* C interface to kaprobe. Every function returns a kap_status; on failure
 * kap_last_error() describes the error for the calling thread.
 *
 * Functions taking (char* out, size_t cap, size_t* needed) write a
 * NUL-terminated string. *needed (if non-NULL) always receives the required
 * size including the terminator; out == NULL only queries it, and a too-small
 * cap returns KAP_ERR_BUFFER. Byte outputs follow the same rule without the
 * terminator. */
#ifndef KAPROBE_H
#define KAPROBE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define KAP_API __declspec(dllexport)
#else
#define KAP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kap_status {
  KAP_OK = 0,
  KAP_ERR_LENGTH = 1,
  KAP_ERR_VERSION = 2,
  KAP_ERR_MALFORMED = 3,
  KAP_ERR_DOMAIN = 4,
  KAP_ERR_INPUT = 5,
  KAP_ERR_CONFIG = 6,
  KAP_ERR_UNKNOWN_PROFILE = 7,
  KAP_ERR_UNKNOWN_EXPERIMENT = 8,
  KAP_ERR_BIND = 9,
  KAP_ERR_TRANSPORT = 10,
  KAP_ERR_BUFFER = 20,
  KAP_ERR_NULL = 21,
  KAP_ERR_INTERNAL = 22,
  /* Non-error outcomes. */
  KAP_UNCHANGED = 30,       /* piggyback would exceed the MTU budget */
  KAP_NOT_PIGGYBACKED = 31, /* plain version-4 datagram */
  KAP_INFINITE = 32         /* false-positive interval is unbounded */
} kap_status;

KAP_API const char* kap_status_name(kap_status status);
KAP_API const char* kap_last_error(void);
KAP_API const char* kap_version(void);

/* ---- wire ---------------------------------------------------------------- */

#define KAP_PROBE_BODY_SIZE 28

typedef struct kap_probe_body {
  uint32_t seq;
  uint32_t tsc;
  uint32_t tss;
  uint32_t dt;
  uint32_t s_local;
  uint32_t s_echo;
  uint32_t r;
} kap_probe_body;

typedef enum kap_channel { KAP_CHANNEL_PROBE = 0, KAP_CHANNEL_DATA = 1 } kap_channel;
typedef enum kap_direction {
  KAP_CLIENT_TO_SERVER = 0,
  KAP_SERVER_TO_CLIENT = 1
} kap_direction;
typedef enum kap_frame_kind {
  KAP_FRAME_PROBE_REQUEST = 0,
  KAP_FRAME_PROBE_RESPONSE = 1,
  KAP_FRAME_DATA = 2,
  KAP_FRAME_DATA_PIGGYBACKED_REQUEST = 3,
  KAP_FRAME_DATA_PIGGYBACKED_RESPONSE = 4
} kap_frame_kind;

KAP_API kap_status kap_probe_encode(const kap_probe_body* body,
                                    uint8_t out[KAP_PROBE_BODY_SIZE]);
KAP_API kap_status kap_probe_decode(const uint8_t* bytes, size_t len, kap_probe_body* body);
/* KAP_UNCHANGED when the result would exceed mtu_budget; *needed is then 0. */
KAP_API kap_status kap_piggyback_attach(const uint8_t* inner, size_t len,
                                        const kap_probe_body* body, size_t mtu_budget,
                                        uint8_t* out, size_t cap, size_t* needed);
KAP_API kap_status kap_piggyback_extract(const uint8_t* frame, size_t len, uint8_t* out,
                                         size_t cap, size_t* needed, kap_probe_body* body);
KAP_API kap_status kap_frame_classify(kap_channel channel, kap_direction direction,
                                      const uint8_t* bytes, size_t len, kap_frame_kind* kind);

/* ---- estimators and models ---------------------------------------------- */

typedef struct kap_ewma kap_ewma;

/* worse_is_decrease: 0 treats increases as worsening. reference_previous: 0
 * picks the time constant by comparing with the estimate, 1 with the previous
 * sample. Equal taus give the symmetric estimator. */
KAP_API kap_status kap_ewma_create(double tau_worse_s, double tau_better_s,
                                   int worse_is_decrease, int reference_previous,
                                   kap_ewma** out);
/* *accepted is 0 when the sample was not newer than the last one. */
KAP_API kap_status kap_ewma_update(kap_ewma* ewma, double sample, double at_s, int* accepted);
KAP_API kap_status kap_ewma_value(const kap_ewma* ewma, double* value, int* initialized);
KAP_API void kap_ewma_destroy(kap_ewma* ewma);

KAP_API kap_status kap_tau_from_alpha(double alpha, double interval_s, double* tau_s);
KAP_API kap_status kap_timeliness(double tau_s, double* seconds);
KAP_API kap_status kap_rtl_combine(double owl_c, double owl_s, double* rtl);

KAP_API kap_status kap_responsiveness(int k, double t_ka_ms, double rtt_max_ms,
                                      double rtt_avg_ms, double* worst_ms, double* average_ms);
KAP_API kap_status kap_false_positive_prob(double p_loss, int k, double* p_fp);
KAP_API kap_status kap_false_positive_interval(double p_loss, int k, double t_ka_ms,
                                               double* seconds);

/* ---- planner ------------------------------------------------------------- */

typedef struct kap_plan_input {
  double p_loss;
  double rtt_avg_ms;
  double t_ravg_max_ms;
  double t_fp_min_s;
  double t_ka_min_ms;
  int k_max;
  double granularity_ms;
  int worst_case;
  double rtt_max_ms; /* < 0: same as rtt_avg_ms */
} kap_plan_input;

typedef struct kap_plan_result {
  int feasible;
  int k_star;
  double t_ka_star_ms;
  double t_ka_operational_ms;
  double p_fp;
  double t_fp_s;
  double t_ravg_ms;
  double t_rmax_ms;
} kap_plan_result;

KAP_API void kap_plan_input_default(kap_plan_input* input);
/* Infeasible inputs still return KAP_OK with result->feasible == 0. */
KAP_API kap_status kap_plan_solve(const kap_plan_input* input, kap_plan_result* result);
/* sweep: "var:from:to[:points[:log]]" with var one of K, p_loss, t_fp_min,
 * t_ravg_max. */
KAP_API kap_status kap_plan_sweep_csv(const kap_plan_input* input, const char* sweep,
                                      double fixed_t_ka_ms, char* out, size_t cap,
                                      size_t* needed);

/* ---- profiles ------------------------------------------------------------ */

/* Newline-separated library profile names. */
KAP_API kap_status kap_profile_names(char* out, size_t cap, size_t* needed);
/* Library name or file path, rendered in the profile text format. */
KAP_API kap_status kap_profile_describe(const char* name_or_path, char* out, size_t cap,
                                        size_t* needed);

/* ---- run configuration --------------------------------------------------- */

typedef struct kap_config kap_config;

KAP_API kap_status kap_config_create(kap_config** out);
KAP_API kap_status kap_config_load(const char* path, kap_config** out);
KAP_API kap_status kap_config_parse(const char* text, kap_config** out);
KAP_API kap_status kap_config_set(kap_config* config, const char* key, const char* value);
KAP_API kap_status kap_config_add_peer(kap_config* config, const char* peer);
/* verb: "server", "client" or "relay". */
KAP_API kap_status kap_config_validate(const kap_config* config, const char* verb);
KAP_API kap_status kap_config_get(const kap_config* config, const char* key, char* out,
                                  size_t cap, size_t* needed);
KAP_API void kap_config_destroy(kap_config* config);

/* ---- daemons ------------------------------------------------------------- */

typedef struct kap_daemon kap_daemon;

typedef struct kap_daemon_stats {
  uint64_t frames_in;
  uint64_t explicit_requests;
  uint64_t piggybacked_requests;
  uint64_t explicit_responses;
  uint64_t piggybacked_responses;
  uint64_t data_sent;
  uint64_t data_received;
  uint64_t sessions;
  uint64_t malformed_frames;
  uint64_t send_errors;
  uint64_t log_records;
  uint64_t log_dropped;
} kap_daemon_stats;

/* verb: "server" or "client". Validates the configuration before binding.
 * The event log goes to the config's "out" path ("-" for stdout). */
KAP_API kap_status kap_daemon_create(const kap_config* config, const char* verb,
                                     kap_daemon** out);
/* Blocks until kap_daemon_stop, a "stop" control command or duration_s. */
KAP_API kap_status kap_daemon_run(kap_daemon* daemon);
/* Async-signal-safe. */
KAP_API void kap_daemon_stop(kap_daemon* daemon);
KAP_API kap_status kap_daemon_port(const kap_daemon* daemon, uint16_t* probe_port,
                                   uint16_t* control_port);
KAP_API kap_status kap_daemon_stats_get(const kap_daemon* daemon, kap_daemon_stats* stats);
KAP_API void kap_daemon_destroy(kap_daemon* daemon);

/* Sends one command to a daemon control port. Every call sends the command,
 * so pass a buffer of KAP_CONTROL_REPLY_MAX bytes rather than querying the
 * size first. */
#define KAP_CONTROL_REPLY_MAX (65536 + 1)
KAP_API kap_status kap_control_send(uint16_t port, const char* command, char* out, size_t cap,
                                    size_t* needed);

typedef struct kap_relay kap_relay;

typedef struct kap_relay_stats {
  uint64_t forwarded_up;
  uint64_t forwarded_down;
  uint64_t dropped_up;
  uint64_t dropped_down;
  uint64_t clients;
} kap_relay_stats;

/* Uses the config keys listen, upstream, profile, seed and duration_s. */
KAP_API kap_status kap_relay_create(const kap_config* config, kap_relay** out);
KAP_API kap_status kap_relay_run(kap_relay* relay);
KAP_API void kap_relay_stop(kap_relay* relay);
KAP_API kap_status kap_relay_port(const kap_relay* relay, uint16_t* port);
KAP_API kap_status kap_relay_stats_get(const kap_relay* relay, kap_relay_stats* stats);
KAP_API void kap_relay_destroy(kap_relay* relay);

/* ---- experiments and bench ---------------------------------------------- */

#define KAP_MAX_LIST 16

/* Negative numbers and NULL strings select the experiment's default. */
typedef struct kap_experiment_options {
  uint64_t seed;
  int log_jsonl;
  double t_ka_ms;
  int k;
  int n;
  double alphas[KAP_MAX_LIST];
  size_t alpha_count;
  double taus_s[KAP_MAX_LIST];
  size_t tau_count;
  int64_t trials;
  double duration_s;
  double rtt_ms;
  double p_loss;
  int ks[KAP_MAX_LIST];
  size_t k_count;
  const char* profile;
  const char* fault_direction;
  double data_rate_pps;
  int wall_clock;
} kap_experiment_options;

typedef struct kap_experiment kap_experiment;

KAP_API void kap_experiment_options_default(kap_experiment_options* options);
KAP_API kap_status kap_experiment_names(char* out, size_t cap, size_t* needed);
KAP_API kap_status kap_experiment_run(const char* name, const kap_experiment_options* options,
                                      kap_experiment** out);
/* key=value lines. */
KAP_API kap_status kap_experiment_summary(const kap_experiment* exp, char* out, size_t cap,
                                          size_t* needed);
KAP_API kap_status kap_experiment_value(const kap_experiment* exp, const char* key,
                                        double* value);
KAP_API kap_status kap_experiment_log(const kap_experiment* exp, char* out, size_t cap,
                                      size_t* needed);
/* Writes the event log, summary and tables into dir; returns newline-separated
 * paths. */
KAP_API kap_status kap_experiment_write(const kap_experiment* exp, const char* dir, char* out,
                                        size_t cap, size_t* needed);
KAP_API void kap_experiment_destroy(kap_experiment* exp);

typedef struct kap_bench_options {
  size_t sessions;
  double t_ka_ms;
  double duration_s;
  double flood_s;
} kap_bench_options;

typedef struct kap_bench_report {
  int empty;
  uint64_t requests_sent;
  uint64_t responses_received;
  double responses_per_s;
  uint64_t deadlines_fired;
  uint64_t deadline_misses;
  double max_lateness_ms;
  double processing_p50_us;
  double processing_p99_us;
  double flood_probes_per_s;
} kap_bench_report;

KAP_API void kap_bench_options_default(kap_bench_options* options);
/* text (optional) receives the key=value report. */
KAP_API kap_status kap_bench_run(const kap_bench_options* options, kap_bench_report* report,
                                 char* text, size_t cap, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* KAPROBE_H */
