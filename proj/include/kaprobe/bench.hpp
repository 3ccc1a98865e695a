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

#include <cstddef>
#include <cstdint>
#include <string>

namespace kaprobe {

struct BenchOptions {
  std::size_t sessions = 1000;
  double t_ka_ms = 500.0;
  double duration_s = 10.0;  // paced run; 0 gives an empty report
  double flood_s = 1.0;      // unpaced ceiling run; 0 skips it
};

struct LatencySummary {
  double p50_us = 0.0;
  double p99_us = 0.0;
  double max_us = 0.0;
};

struct BenchReport {
  bool empty = true;
  std::size_t sessions = 0;
  double t_ka_ms = 0.0;
  double duration_s = 0.0;
  std::uint64_t requests_sent = 0;
  std::uint64_t responses_received = 0;
  double responses_per_s = 0.0;
  std::uint64_t deadlines_fired = 0;
  std::uint64_t deadline_misses = 0;  // fired more than T_KA/10 late
  double max_lateness_ms = 0.0;
  LatencySummary processing;  // server time per request, paced run

  double flood_s = 0.0;
  std::uint64_t flood_probes = 0;
  double flood_probes_per_s = 0.0;
  LatencySummary flood_processing;

  // key=value lines; empty for an empty report.
  std::string text() const;
};

// Client and server engines in one process joined by an in-memory transport,
// paced by the steady clock.
BenchReport run_bench(const BenchOptions& options);

}  // namespace kaprobe
