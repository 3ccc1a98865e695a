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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kaprobe/log.hpp"
#include "kaprobe/planner.hpp"

namespace kaprobe {

// Unset fields take the experiment's own default.
struct ExperimentOptions {
  std::uint64_t seed = 1;
  LogFormat log_format = LogFormat::kCsv;
  std::optional<double> t_ka_ms;
  std::optional<int> k;
  std::optional<int> n;
  std::vector<double> alphas;   // rtt-step, rtt-3level
  std::vector<double> taus_s;   // rtt-step: extra time constants
  std::optional<std::uint64_t> trials;  // fault trials, epochs or probes
  std::optional<double> duration_s;
  std::optional<double> rtt_ms;
  std::optional<double> p_loss;
  std::vector<int> ks;          // fpev-montecarlo
  std::string profile;          // library name or profile file
  std::string fault_direction;  // fault-detect: random, up, down, both
  double data_rate_pps = -1.0;  // owl-3level uplink data; < 0 means default
  bool wall_clock = false;      // pace virtual time against the steady clock
};

struct ExperimentResult {
  std::string name;
  std::vector<std::pair<std::string, double>> summary;
  std::vector<std::pair<std::string, CurveTable>> tables;
  std::string log;  // event log in the requested format

  // Throws InputError for a missing key.
  double value(std::string_view key) const;
  const CurveTable& table(std::string_view name) const;
  std::string summary_text() const;
};

// rtt-step, rtt-3level, rtt-asym, owl-3level, fault-detect, fpev-montecarlo
// and rtl-montecarlo. Throws UnknownExperimentError.
ExperimentResult run_experiment(std::string_view name, const ExperimentOptions& options = {});
std::vector<std::string> experiment_names();

// Writes <name>_events.<csv|jsonl>, <name>_summary.txt and one
// <name>_<table>.csv per table into `dir`, creating it. Returns the paths.
std::vector<std::string> write_experiment(const ExperimentResult& result,
                                          const std::string& dir, LogFormat format);

}  // namespace kaprobe
