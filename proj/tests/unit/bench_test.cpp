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

#include "kaprobe/bench.hpp"

namespace kaprobe {
namespace {

TEST(Bench, ZeroDurationIsEmpty) {
  BenchOptions o;
  o.duration_s = 0.0;
  const BenchReport r = run_bench(o);
  EXPECT_TRUE(r.empty);
  EXPECT_EQ(r.requests_sent, 0u);
  EXPECT_EQ(r.text(), "");
}

TEST(Bench, ShortPacedRun) {
  BenchOptions o;
  o.sessions = 200;
  o.t_ka_ms = 100.0;
  o.duration_s = 1.0;
  o.flood_s = 0.2;
  const BenchReport r = run_bench(o);
  ASSERT_FALSE(r.empty);
  EXPECT_EQ(r.sessions, 200u);
  // 200 sessions at 10 probes/s each.
  EXPECT_NEAR(static_cast<double>(r.requests_sent), 2000.0, 250.0);
  EXPECT_GE(r.responses_received + 200, r.requests_sent);
  EXPECT_GT(r.responses_per_s, 1500.0);
  EXPECT_EQ(r.deadline_misses, 0u);
  EXPECT_LE(r.max_lateness_ms, 10.0);
  EXPECT_LE(r.processing.p50_us, r.processing.p99_us);
  EXPECT_LE(r.processing.p99_us, r.processing.max_us);
  EXPECT_GT(r.flood_probes, 0u);
  EXPECT_GT(r.flood_probes_per_s, r.responses_per_s);
  const std::string text = r.text();
  EXPECT_NE(text.find("responses_per_s="), std::string::npos);
  EXPECT_NE(text.find("deadline_misses=0\n"), std::string::npos);
}

TEST(Bench, FloodCanBeSkipped) {
  BenchOptions o;
  o.sessions = 10;
  o.t_ka_ms = 50;
  o.duration_s = 0.3;
  o.flood_s = 0.0;
  const BenchReport r = run_bench(o);
  EXPECT_FALSE(r.empty);
  EXPECT_EQ(r.flood_probes, 0u);
}

}  // namespace
}  // namespace kaprobe
