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

#include <string>
#include <string_view>
#include <vector>

namespace kaprobe {

struct PlannerInput {
  double p_loss = 0.05;            // per-direction loss fraction, (0, 1)
  double rtt_avg_ms = 100.0;
  double t_ravg_max_ms = 500.0;    // responsiveness target
  double t_fp_min_s = 1e5;         // minimum mean interval between false positives
  double t_ka_min_ms = 0.0;
  int k_max = 64;
  double granularity_ms = 1.0;     // timer step used for the operational T_KA
  // Worst-case mode constrains (K + 1) T_KA + RTT_max instead of the average.
  bool worst_case = false;
  double rtt_max_ms = -1.0;        // defaults to rtt_avg_ms when negative

  // Throws InputError on an invariant violation.
  void validate() const;
};

struct PlannerResult {
  bool feasible = false;
  int k_star = 0;
  // Supremum of the admissible T_KA range for K*.
  double t_ka_star_ms = 0.0;
  // Largest timer-grid value that satisfies both strict inequalities.
  double t_ka_operational_ms = 0.0;
  // Predictions at the operational T_KA.
  double p_fp = 0.0;
  double t_fp_s = 0.0;
  double t_ravg_ms = 0.0;
  double t_rmax_ms = 0.0;
};

PlannerResult solve(const PlannerInput& input);

enum class SweepVariable { kK, kPLoss, kTfpMin, kTRavgMax };

struct SweepSpec {
  SweepVariable variable = SweepVariable::kPLoss;
  double from = 0.005;
  double to = 0.08;
  int points = 16;
  bool log_scale = false;
  // T_KA held fixed while sweeping K.
  double fixed_t_ka_ms = 100.0;
};

// "<variable>:<from>:<to>[:<points>[:log]]" with variable one of
// K, p_loss, t_fp_min, t_ravg_max. Throws InputError.
SweepSpec parse_sweep(std::string_view text);

struct CurveTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const;
};

// K sweep rows: K, t_ravg_ms, t_rmax_ms, p_fp, t_fp_s (at fixed T_KA).
// Other sweeps: value, k_star, t_ka_star_ms, t_ka_operational_ms, feasible.
CurveTable tradeoff_curves(const PlannerInput& input, const SweepSpec& sweep);

}  // namespace kaprobe
