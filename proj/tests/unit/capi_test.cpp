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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kaprobe.h"

namespace {

std::string read_string(kap_status (*fn)(char*, size_t, size_t*)) {
  size_t needed = 0;
  EXPECT_EQ(fn(nullptr, 0, &needed), KAP_OK);
  std::string s(needed, '\0');
  EXPECT_EQ(fn(s.data(), s.size(), &needed), KAP_OK);
  s.resize(needed - 1);
  return s;
}

// Independent big-endian encoder.
std::vector<uint8_t> reference_encode(const uint32_t (&words)[7]) {
  std::vector<uint8_t> out;
  for (uint32_t w : words) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<uint8_t>(w >> shift));
  }
  return out;
}

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(kap_status_name(KAP_OK), "ok");
  EXPECT_STREQ(kap_status_name(KAP_ERR_BUFFER), "buffer");
  EXPECT_STRNE(kap_status_name(KAP_ERR_CONFIG), kap_status_name(KAP_ERR_INPUT));
  EXPECT_STREQ(kap_version(), "1.0.0");
}

TEST(CApi, ProbeEncodeMatchesReference) {
  const kap_probe_body b{0x01020304u, 0xdeadbeefu, 0, 70, 5, 6, 0xffffffffu};
  uint8_t out[KAP_PROBE_BODY_SIZE];
  ASSERT_EQ(kap_probe_encode(&b, out), KAP_OK);
  const uint32_t words[7] = {b.seq, b.tsc, b.tss, b.dt, b.s_local, b.s_echo, b.r};
  EXPECT_EQ(std::vector<uint8_t>(out, out + sizeof out), reference_encode(words));
  kap_probe_body back{};
  ASSERT_EQ(kap_probe_decode(out, sizeof out, &back), KAP_OK);
  EXPECT_EQ(std::memcmp(&back, &b, sizeof b), 0);
  EXPECT_EQ(kap_probe_decode(out, 27, &back), KAP_ERR_LENGTH);
  EXPECT_NE(std::string(kap_last_error()), "");
  EXPECT_EQ(kap_probe_encode(nullptr, out), KAP_ERR_NULL);
}

TEST(CApi, PiggybackRoundTripAndBufferConvention) {
  const std::vector<uint8_t> inner{0x45, 1, 2, 3, 4, 5};
  const kap_probe_body b{7, 1, 2, 3, 4, 5, 6};
  size_t needed = 0;
  ASSERT_EQ(kap_piggyback_attach(inner.data(), inner.size(), &b, 1472, nullptr, 0, &needed),
            KAP_OK);
  EXPECT_EQ(needed, inner.size() + KAP_PROBE_BODY_SIZE);
  std::vector<uint8_t> small(needed - 1);
  EXPECT_EQ(kap_piggyback_attach(inner.data(), inner.size(), &b, 1472, small.data(),
                                 small.size(), &needed),
            KAP_ERR_BUFFER);
  EXPECT_EQ(needed, inner.size() + KAP_PROBE_BODY_SIZE);
  std::vector<uint8_t> frame(needed);
  ASSERT_EQ(kap_piggyback_attach(inner.data(), inner.size(), &b, 1472, frame.data(),
                                 frame.size(), &needed),
            KAP_OK);
  EXPECT_EQ(frame[0] >> 4, 15);
  EXPECT_EQ(frame[0] & 0x0f, 0x05);
  const uint32_t words[7] = {7, 1, 2, 3, 4, 5, 6};
  const std::vector<uint8_t> expected = reference_encode(words);
  ASSERT_EQ(frame.size(), inner.size() + expected.size());
  EXPECT_TRUE(std::equal(expected.begin(), expected.end(), frame.begin() + inner.size()));

  kap_frame_kind kind;
  ASSERT_EQ(kap_frame_classify(KAP_CHANNEL_DATA, KAP_CLIENT_TO_SERVER, frame.data(),
                               frame.size(), &kind),
            KAP_OK);
  EXPECT_EQ(kind, KAP_FRAME_DATA_PIGGYBACKED_REQUEST);
  ASSERT_EQ(kap_frame_classify(KAP_CHANNEL_DATA, KAP_SERVER_TO_CLIENT, inner.data(),
                               inner.size(), &kind),
            KAP_OK);
  EXPECT_EQ(kind, KAP_FRAME_DATA);

  std::vector<uint8_t> restored(inner.size());
  kap_probe_body got{};
  ASSERT_EQ(kap_piggyback_extract(frame.data(), frame.size(), restored.data(),
                                  restored.size(), &needed, &got),
            KAP_OK);
  EXPECT_EQ(restored, inner);
  EXPECT_EQ(std::memcmp(&got, &b, sizeof b), 0);
  EXPECT_EQ(kap_piggyback_extract(inner.data(), inner.size(), restored.data(),
                                  restored.size(), &needed, &got),
            KAP_NOT_PIGGYBACKED);
  EXPECT_EQ(kap_piggyback_attach(inner.data(), inner.size(), &b, inner.size() + 27,
                                 frame.data(), frame.size(), &needed),
            KAP_UNCHANGED);
  EXPECT_EQ(needed, 0u);
  const uint8_t v6[] = {0x60, 0};
  EXPECT_EQ(kap_piggyback_attach(v6, 2, &b, 1472, frame.data(), frame.size(), &needed),
            KAP_ERR_VERSION);
  const uint8_t short15[] = {0xf0, 0, 0};
  EXPECT_EQ(kap_piggyback_extract(short15, 3, restored.data(), restored.size(), &needed, &got),
            KAP_ERR_MALFORMED);
}

TEST(CApi, Ewma) {
  kap_ewma* e = nullptr;
  ASSERT_EQ(kap_ewma_create(1.0, 1.0, 0, 0, &e), KAP_OK);
  int accepted = 0, init = 1;
  double v = -1;
  ASSERT_EQ(kap_ewma_value(e, &v, &init), KAP_OK);
  EXPECT_EQ(init, 0);
  ASSERT_EQ(kap_ewma_update(e, 10.0, 0.0, &accepted), KAP_OK);
  EXPECT_EQ(accepted, 1);
  ASSERT_EQ(kap_ewma_update(e, 20.0, 1.0, &accepted), KAP_OK);
  ASSERT_EQ(kap_ewma_value(e, &v, &init), KAP_OK);
  EXPECT_NEAR(v, 10.0 + 10.0 * (1.0 - std::exp(-1.0)), 1e-12);
  ASSERT_EQ(kap_ewma_update(e, 99.0, 1.0, &accepted), KAP_OK);
  EXPECT_EQ(accepted, 0);
  kap_ewma_destroy(e);
  kap_ewma_destroy(nullptr);
  EXPECT_EQ(kap_ewma_create(0.0, 1.0, 0, 0, &e), KAP_ERR_DOMAIN);
}

TEST(CApi, Models) {
  double tau = 0, t = 0, rtl = 0, worst = 0, avg = 0, p = 0, fp = 0;
  ASSERT_EQ(kap_tau_from_alpha(0.8, 0.2, &tau), KAP_OK);
  EXPECT_NEAR(tau, -0.2 / std::log(1.0 - 0.8), 1e-12);
  ASSERT_EQ(kap_timeliness(1.0, &t), KAP_OK);
  EXPECT_NEAR(t, std::log(10.0), 1e-12);
  ASSERT_EQ(kap_rtl_combine(0.05, 0.05, &rtl), KAP_OK);
  EXPECT_NEAR(rtl, 0.0975, 1e-15);
  ASSERT_EQ(kap_responsiveness(7, 60, 100, 100, &worst, &avg), KAP_OK);
  EXPECT_NEAR(worst, 7 * 60 + 100 + 60, 1e-9);
  ASSERT_EQ(kap_false_positive_prob(0.05, 2, &p), KAP_OK);
  EXPECT_NEAR(p, 0.0975 * 0.0975, 1e-15);
  ASSERT_EQ(kap_false_positive_interval(0.05, 2, 100, &fp), KAP_OK);
  EXPECT_EQ(kap_false_positive_interval(0.0, 2, 100, &fp), KAP_INFINITE);
  EXPECT_EQ(kap_false_positive_prob(1.5, 2, &p), KAP_ERR_DOMAIN);
  EXPECT_EQ(kap_tau_from_alpha(1.0, 0.2, &tau), KAP_ERR_DOMAIN);
}

TEST(CApi, Planner) {
  kap_plan_input in;
  kap_plan_input_default(&in);
  kap_plan_result r{};
  ASSERT_EQ(kap_plan_solve(&in, &r), KAP_OK);
  EXPECT_EQ(r.feasible, 1);
  EXPECT_EQ(r.k_star, 7);
  EXPECT_DOUBLE_EQ(r.t_ka_star_ms, 60.0);
  EXPECT_DOUBLE_EQ(r.t_ka_operational_ms, 59.0);
  in.t_fp_min_s = 1e30;
  in.k_max = 3;
  ASSERT_EQ(kap_plan_solve(&in, &r), KAP_OK);
  EXPECT_EQ(r.feasible, 0);
  kap_plan_input_default(&in);
  in.p_loss = 2;
  EXPECT_EQ(kap_plan_solve(&in, &r), KAP_ERR_INPUT);

  kap_plan_input_default(&in);
  size_t needed = 0;
  ASSERT_EQ(kap_plan_sweep_csv(&in, "K:1:5", 100, nullptr, 0, &needed), KAP_OK);
  std::string csv(needed, '\0');
  ASSERT_EQ(kap_plan_sweep_csv(&in, "K:1:5", 100, csv.data(), csv.size(), &needed), KAP_OK);
  EXPECT_EQ(csv.rfind("K,", 0), 0u);
  EXPECT_EQ(kap_plan_sweep_csv(&in, "Q:1:5", 100, csv.data(), csv.size(), &needed),
            KAP_ERR_INPUT);
}

TEST(CApi, Profiles) {
  const std::string names = read_string(kap_profile_names);
  EXPECT_NE(names.find('\n'), std::string::npos);
  const std::string first = names.substr(0, names.find('\n'));
  size_t needed = 0;
  ASSERT_EQ(kap_profile_describe(first.c_str(), nullptr, 0, &needed), KAP_OK);
  EXPECT_GT(needed, 1u);
  char tiny[2];
  EXPECT_EQ(kap_profile_describe(first.c_str(), tiny, sizeof tiny, &needed), KAP_ERR_BUFFER);
  EXPECT_EQ(kap_profile_describe("no-such-profile", nullptr, 0, &needed),
            KAP_ERR_UNKNOWN_PROFILE);
}

TEST(CApi, Config) {
  kap_config* c = nullptr;
  ASSERT_EQ(kap_config_create(&c), KAP_OK);
  EXPECT_EQ(kap_config_set(c, "k", "0"), KAP_ERR_CONFIG);
  EXPECT_EQ(kap_config_set(c, "nope", "1"), KAP_ERR_CONFIG);
  EXPECT_EQ(kap_config_set(c, "k", "5"), KAP_OK);
  EXPECT_EQ(kap_config_validate(c, "client"), KAP_ERR_CONFIG);
  EXPECT_EQ(kap_config_add_peer(c, "127.0.0.1:47000"), KAP_OK);
  EXPECT_EQ(kap_config_validate(c, "client"), KAP_OK);
  char buf[16];
  size_t needed = 0;
  ASSERT_EQ(kap_config_get(c, "k", buf, sizeof buf, &needed), KAP_OK);
  EXPECT_STREQ(buf, "5");
  EXPECT_EQ(needed, 2u);
  kap_config_destroy(c);
  EXPECT_EQ(kap_config_parse("k = 3\nbad line\n", &c), KAP_ERR_CONFIG);
  EXPECT_NE(std::string(kap_last_error()).find("line 2"), std::string::npos);
  EXPECT_EQ(kap_config_load("/nonexistent/kaprobe.conf", &c), KAP_ERR_CONFIG);
  EXPECT_EQ(kap_config_create(nullptr), KAP_ERR_NULL);
}

TEST(CApi, DaemonsOverLoopback) {
  const std::string log_path = ::testing::TempDir() + "/kaprobe_capi_client.csv";
  kap_config* sc = nullptr;
  ASSERT_EQ(kap_config_parse("bind = 127.0.0.1:0\nout = /dev/null\nt_ka_ms = 100\n", &sc),
            KAP_OK);
  kap_daemon* server = nullptr;
  ASSERT_EQ(kap_daemon_create(sc, "server", &server), KAP_OK) << kap_last_error();
  uint16_t server_port = 0, control = 1;
  ASSERT_EQ(kap_daemon_port(server, &server_port, &control), KAP_OK);
  EXPECT_NE(server_port, 0);
  EXPECT_EQ(control, 0);

  kap_config* cc = nullptr;
  ASSERT_EQ(kap_config_create(&cc), KAP_OK);
  kap_config_set(cc, "bind", "127.0.0.1:0");
  kap_config_set(cc, "t_ka_ms", "100");
  kap_config_set(cc, "duration_s", "1.05");
  kap_config_set(cc, "out", log_path.c_str());
  kap_config_add_peer(cc, ("127.0.0.1:" + std::to_string(server_port)).c_str());
  kap_daemon* client = nullptr;
  ASSERT_EQ(kap_daemon_create(cc, "client", &client), KAP_OK) << kap_last_error();

  // The server's probe port is in use.
  kap_daemon* dup = nullptr;
  kap_config_set(sc, "bind", ("127.0.0.1:" + std::to_string(server_port)).c_str());
  EXPECT_EQ(kap_daemon_create(sc, "server", &dup), KAP_ERR_BIND);

  std::thread st([&] { kap_daemon_run(server); });
  EXPECT_EQ(kap_daemon_run(client), KAP_OK);
  kap_daemon_stop(server);
  st.join();
  kap_daemon_stats stats{};
  ASSERT_EQ(kap_daemon_stats_get(client, &stats), KAP_OK);
  EXPECT_GE(stats.explicit_requests, 10u);
  EXPECT_EQ(stats.sessions, 1u);
  EXPECT_GE(stats.log_records, 10u);
  EXPECT_EQ(stats.log_dropped, 0u);
  kap_daemon_destroy(client);
  kap_daemon_destroy(server);
  kap_config_destroy(cc);
  kap_config_destroy(sc);

  std::ifstream log(log_path);
  std::string header, line;
  std::getline(log, header);
  EXPECT_EQ(header, "time_ms,session,event,metric,raw,ewma,status,prev_status");
  int rtt = 0;
  while (std::getline(log, line)) rtt += line.find(",rtt,") != std::string::npos;
  EXPECT_GE(rtt, 9);
}

TEST(CApi, RelayNeedsUpstream) {
  kap_config* c = nullptr;
  ASSERT_EQ(kap_config_create(&c), KAP_OK);
  kap_relay* r = nullptr;
  EXPECT_EQ(kap_relay_create(c, &r), KAP_ERR_CONFIG);
  kap_config_set(c, "upstream", "127.0.0.1:47000");
  kap_config_set(c, "listen", "127.0.0.1:0");
  kap_config_set(c, "profile", "no-such-profile");
  EXPECT_EQ(kap_relay_create(c, &r), KAP_ERR_UNKNOWN_PROFILE);
  kap_config_destroy(c);
}

TEST(CApi, Experiments) {
  const std::string names = read_string(kap_experiment_names);
  EXPECT_NE(names.find("rtt-step"), std::string::npos);
  kap_experiment_options o;
  kap_experiment_options_default(&o);
  kap_experiment* e = nullptr;
  EXPECT_EQ(kap_experiment_run("nope", &o, &e), KAP_ERR_UNKNOWN_EXPERIMENT);
  o.trials = 200;
  ASSERT_EQ(kap_experiment_run("fault-detect", &o, &e), KAP_OK);
  double v = -1;
  ASSERT_EQ(kap_experiment_value(e, "violations", &v), KAP_OK);
  EXPECT_EQ(v, 0.0);
  ASSERT_EQ(kap_experiment_value(e, "trials", &v), KAP_OK);
  EXPECT_EQ(v, 200.0);
  EXPECT_EQ(kap_experiment_value(e, "nope", &v), KAP_ERR_INPUT);
  size_t needed = 0;
  ASSERT_EQ(kap_experiment_summary(e, nullptr, 0, &needed), KAP_OK);
  std::string summary(needed, '\0');
  ASSERT_EQ(kap_experiment_summary(e, summary.data(), summary.size(), &needed), KAP_OK);
  EXPECT_EQ(summary.rfind("experiment=fault-detect\n", 0), 0u);
  ASSERT_EQ(kap_experiment_log(e, nullptr, 0, &needed), KAP_OK);
  EXPECT_GT(needed, 1u);
  kap_experiment_destroy(e);

  o.alpha_count = KAP_MAX_LIST + 1;
  EXPECT_EQ(kap_experiment_run("rtt-step", &o, &e), KAP_ERR_INPUT);
}

TEST(CApi, BenchEmpty) {
  kap_bench_options o;
  kap_bench_options_default(&o);
  o.duration_s = 0;
  kap_bench_report r{};
  size_t needed = 7;
  ASSERT_EQ(kap_bench_run(&o, &r, nullptr, 0, &needed), KAP_OK);
  EXPECT_EQ(r.empty, 1);
  EXPECT_EQ(needed, 1u);
}

}  // namespace
