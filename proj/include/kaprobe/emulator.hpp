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
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "kaprobe/time.hpp"
#include "kaprobe/wire.hpp"

namespace kaprobe {

// One piece of a piecewise-constant impairment schedule. "Up" is the
// client-to-server direction.
struct Segment {
  double start_s = 0.0;
  double delay_up_ms = 0.0;
  double delay_down_ms = 0.0;
  double loss_up = 0.0;
  double loss_down = 0.0;
};

enum class FaultDirection : std::uint8_t { kBoth, kUp, kDown };

struct ImpairmentProfile {
  std::vector<Segment> segments;
  std::optional<double> period_s;  // schedule repeats with this period
  std::uint64_t seed = 1;
  std::optional<double> fault_at_s;  // everything sent later is dropped
  FaultDirection fault_direction = FaultDirection::kBoth;

  // Throws InputError on an invalid schedule.
  void validate() const;
  const Segment& active(double t_s) const;
  double delay_ms(Direction dir, double t_s) const;
  double loss(Direction dir, double t_s) const;
  bool faulted(Direction dir, double t_s) const;
};

// Constant delay/loss, no period.
ImpairmentProfile constant_profile(double rtt_ms, double loss_up = 0.0,
                                   double loss_down = 0.0);

struct ProfileOptions {
  double switch_s = 3.75;  // RTT-STEP switch time
  double base_rtt_ms = 100.0;
  double fault_s = 10.0;   // HARD-FAULT
  std::uint64_t seed = 1;
};

// RTT-STEP, RTT-3LEVEL, LOSS-3LEVEL, HARD-FAULT (case-insensitive).
// Throws UnknownProfileError.
ImpairmentProfile library_profile(std::string_view name,
                                  const ProfileOptions& options = {});
std::vector<std::string> library_profile_names();

// Text form, one segment per line: "start_s delay_up_ms delay_down_ms
// loss_up loss_down", plus "period", "seed", "fault_at" and
// "fault_direction" header lines and '#' comments. Throws InputError.
ImpairmentProfile parse_profile(std::string_view text);
std::string format_profile(const ImpairmentProfile& profile);

// Library name, or a path to a profile file.
ImpairmentProfile resolve_profile(const std::string& name_or_path,
                                  const ProfileOptions& options = {});

// Per-frame drop decision. Implementations see the frame index within the
// direction and the active segment's nominal loss.
class LossModel {
 public:
  virtual ~LossModel() = default;
  virtual bool drop(Direction dir, std::uint64_t index, double nominal_loss) = 0;
};

// Independent Bernoulli drops from per-direction seeded generators.
class BernoulliLoss final : public LossModel {
 public:
  explicit BernoulliLoss(std::uint64_t seed);
  bool drop(Direction dir, std::uint64_t index, double nominal_loss) override;

 private:
  std::mt19937_64 up_;
  std::mt19937_64 down_;
};

// Two-state (good/bad) burst loss; ignores the nominal segment loss.
class GilbertElliottLoss final : public LossModel {
 public:
  struct Params {
    double p_good_to_bad = 0.01;
    double p_bad_to_good = 0.3;
    double loss_good = 0.0;
    double loss_bad = 1.0;
  };
  GilbertElliottLoss(std::uint64_t seed, Params params);
  bool drop(Direction dir, std::uint64_t index, double nominal_loss) override;

 private:
  Params params_;
  std::mt19937_64 rng_;
  bool bad_[2] = {false, false};
};

// Drops frames whose index modulo `cycle` is listed for that direction.
class PatternLoss final : public LossModel {
 public:
  PatternLoss(std::uint64_t cycle, std::vector<std::uint64_t> drop_up,
              std::vector<std::uint64_t> drop_down);
  bool drop(Direction dir, std::uint64_t index, double nominal_loss) override;

 private:
  std::uint64_t cycle_;
  std::vector<bool> up_;
  std::vector<bool> down_;
};

// Uniform double in [0, 1) from 53 random bits; identical on every platform.
double uniform01(std::mt19937_64& rng);

struct Delivery {
  std::vector<std::uint8_t> frame;
  Time deliver_at;
};

// Impairs one bidirectional link according to a profile. Profile time zero is
// the emulator's `origin`.
class LinkEmulator {
 public:
  explicit LinkEmulator(ImpairmentProfile profile, Time origin = Time::zero(),
                        std::unique_ptr<LossModel> loss = nullptr);

  std::optional<Delivery> transmit(Direction dir, std::vector<std::uint8_t> frame,
                                   Time now);
  // Same decision without a payload.
  std::optional<Time> transmit(Direction dir, Time now);

  const ImpairmentProfile& profile() const { return profile_; }
  std::uint64_t offered(Direction dir) const { return offered_[index(dir)]; }
  std::uint64_t dropped(Direction dir) const { return dropped_[index(dir)]; }

 private:
  static int index(Direction dir) { return dir == Direction::kClientToServer ? 0 : 1; }

  ImpairmentProfile profile_;
  Time origin_;
  std::unique_ptr<LossModel> loss_;
  std::uint64_t offered_[2] = {0, 0};
  std::uint64_t dropped_[2] = {0, 0};
};

}  // namespace kaprobe
