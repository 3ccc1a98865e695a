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

#include "kaprobe/ewma.hpp"

#include <cmath>
#include <string>

#include "kaprobe/errors.hpp"

namespace kaprobe {
namespace {

bool valid_tau(double tau) { return std::isfinite(tau) && tau > 0.0; }

}  // namespace

EwmaEstimator::EwmaEstimator(const EwmaConfig& config) : config_(config) {
  if (!valid_tau(config.tau_up_s) || !valid_tau(config.tau_down_s)) {
    throw DomainError("EWMA time constants must be positive");
  }
}

double EwmaEstimator::select_tau(double sample) const {
  if (config_.is_symmetric()) return config_.tau_up_s;
  const double ref = config_.reference == AsymmetryReference::kEstimate
                         ? value_
                         : last_sample_;
  const bool worse = config_.worse == WorseDirection::kIncrease ? sample > ref
                                                                : sample < ref;
  return worse ? config_.tau_up_s : config_.tau_down_s;
}

bool EwmaEstimator::update(double sample, double at_s) {
  if (!initialized_) {
    value_ = sample;
    last_sample_ = sample;
    last_time_s_ = at_s;
    initialized_ = true;
    return true;
  }
  const double dt = at_s - last_time_s_;
  if (!(dt > 0.0)) {
    ++dropped_;
    return false;
  }
  const double keep = std::exp(-dt / select_tau(sample));
  value_ = (1.0 - keep) * sample + keep * value_;
  last_sample_ = sample;
  last_time_s_ = at_s;
  return true;
}

double tau_from_alpha(double alpha, double reference_interval_s) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
  if (!(reference_interval_s > 0.0) || !std::isfinite(reference_interval_s)) {
    throw DomainError("reference interval must be positive");
  }
  return -reference_interval_s / std::log1p(-alpha);
}

double timeliness(double tau_s) {
  if (!valid_tau(tau_s)) throw DomainError("tau must be positive");
  return tau_s * std::log(10.0);
}

}  // namespace kaprobe
