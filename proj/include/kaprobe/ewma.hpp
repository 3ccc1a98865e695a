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

namespace kaprobe {

// Which sample direction counts as a worsening of the metric.
enum class WorseDirection : std::uint8_t { kIncrease, kDecrease };

// What a sample is compared against when choosing between the two time
// constants of an asymmetric estimator.
enum class AsymmetryReference : std::uint8_t { kEstimate, kPreviousSample };

struct EwmaConfig {
  double tau_up_s = 1.0;    // applied to samples that worsen the metric
  double tau_down_s = 1.0;  // applied to samples that improve it
  WorseDirection worse = WorseDirection::kIncrease;
  AsymmetryReference reference = AsymmetryReference::kEstimate;

  static EwmaConfig symmetric(double tau_s) {
    return EwmaConfig{tau_s, tau_s};
  }
  static EwmaConfig asymmetric(double tau_worse_s, double tau_better_s,
                               WorseDirection worse = WorseDirection::kIncrease) {
    return EwmaConfig{tau_worse_s, tau_better_s, worse};
  }
  bool is_symmetric() const { return tau_up_s == tau_down_s; }
};

// Exponentially weighted average for samples that arrive at irregular times:
//
//   S_k = (1 - e^(-dt/tau)) * x_k + e^(-dt/tau) * S_(k-1),   S_0 = x_0
//
// Samples whose timestamp does not advance past the previous accepted sample
// are dropped and counted.
class EwmaEstimator {
 public:
  // Throws DomainError unless both time constants are positive and finite.
  explicit EwmaEstimator(const EwmaConfig& config);

  // Returns false if the sample was dropped as out of order.
  bool update(double sample, double at_s);

  double value() const { return value_; }
  bool initialized() const { return initialized_; }
  double last_sample_time() const { return last_time_s_; }
  std::uint64_t dropped_samples() const { return dropped_; }
  const EwmaConfig& config() const { return config_; }

 private:
  double select_tau(double sample) const;

  EwmaConfig config_;
  double value_ = 0.0;
  double last_sample_ = 0.0;
  double last_time_s_ = 0.0;
  bool initialized_ = false;
  std::uint64_t dropped_ = 0;
};

// tau = -T / ln(1 - alpha). Throws DomainError unless 0 < alpha < 1 and T > 0.
double tau_from_alpha(double alpha, double reference_interval_s);

// Time for a step response to settle within 10%: tau * ln(10).
double timeliness(double tau_s);

}  // namespace kaprobe
