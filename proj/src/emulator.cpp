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

#include "kaprobe/emulator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kaprobe/errors.hpp"

namespace kaprobe {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_up(Direction dir) { return dir == Direction::kClientToServer; }

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void ImpairmentProfile::validate() const {
  if (segments.empty()) throw InputError("profile has no segments");
  if (segments.front().start_s != 0.0) {
    throw InputError("first segment must start at 0");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    if (i > 0 && !(s.start_s > segments[i - 1].start_s)) {
      throw InputError("segment start times must be strictly increasing");
    }
    if (!(s.delay_up_ms >= 0.0) || !(s.delay_down_ms >= 0.0)) {
      throw InputError("segment delays must be non-negative");
    }
    for (double p : {s.loss_up, s.loss_down}) {
      if (!(p >= 0.0 && p <= 1.0)) throw InputError("segment loss must lie in [0, 1]");
    }
  }
  if (period_s) {
    if (!(*period_s > segments.back().start_s)) {
      throw InputError("period must exceed the last segment start");
    }
  }
  if (fault_at_s && !(*fault_at_s >= 0.0)) {
    throw InputError("fault time must be non-negative");
  }
}

const Segment& ImpairmentProfile::active(double t_s) const {
  double t = std::max(t_s, 0.0);
  if (period_s) t = std::fmod(t, *period_s);
  auto it = std::upper_bound(segments.begin(), segments.end(), t,
                             [](double v, const Segment& s) { return v < s.start_s; });
  return *std::prev(it);
}

double ImpairmentProfile::delay_ms(Direction dir, double t_s) const {
  const Segment& s = active(t_s);
  return is_up(dir) ? s.delay_up_ms : s.delay_down_ms;
}

double ImpairmentProfile::loss(Direction dir, double t_s) const {
  const Segment& s = active(t_s);
  return is_up(dir) ? s.loss_up : s.loss_down;
}

bool ImpairmentProfile::faulted(Direction dir, double t_s) const {
  if (!fault_at_s || t_s < *fault_at_s) return false;
  switch (fault_direction) {
    case FaultDirection::kBoth: return true;
    case FaultDirection::kUp: return is_up(dir);
    case FaultDirection::kDown: return !is_up(dir);
  }
  return true;
}

ImpairmentProfile constant_profile(double rtt_ms, double loss_up, double loss_down) {
  ImpairmentProfile p;
  p.segments.push_back({0.0, rtt_ms / 2.0, rtt_ms / 2.0, loss_up, loss_down});
  return p;
}

ImpairmentProfile library_profile(std::string_view name, const ProfileOptions& options) {
  const std::string key = lower(name);
  ImpairmentProfile p;
  p.seed = options.seed;
  if (key == "rtt-step") {
    const double half = options.base_rtt_ms / 2.0;
    p.segments = {{0.0, half, half, 0.0, 0.0},
                  {options.switch_s, 2.0 * half, 2.0 * half, 0.0, 0.0}};
  } else if (key == "rtt-3level") {
    p.segments = {{0.0, 100.0, 100.0, 0.0, 0.0},
                  {5.0, 150.0, 150.0, 0.0, 0.0},
                  {10.0, 100.0, 100.0, 0.0, 0.0},
                  {15.0, 50.0, 50.0, 0.0, 0.0}};
    p.period_s = 20.0;
  } else if (key == "loss-3level") {
    const double half = options.base_rtt_ms / 2.0;
    p.segments = {{0.0, half, half, 0.001, 0.001},
                  {15.0, half, half, 0.10, 0.10},
                  {30.0, half, half, 0.20, 0.20},
                  {45.0, half, half, 0.10, 0.10}};
    p.period_s = 60.0;
  } else if (key == "hard-fault") {
    p.segments = {{0.0, options.base_rtt_ms / 2.0, options.base_rtt_ms / 2.0, 0.0, 0.0}};
    p.fault_at_s = options.fault_s;
  } else {
    throw UnknownProfileError("unknown profile '" + std::string(name) + "'");
  }
  p.validate();
  return p;
}

std::vector<std::string> library_profile_names() {
  return {"RTT-STEP", "RTT-3LEVEL", "LOSS-3LEVEL", "HARD-FAULT"};
}

ImpairmentProfile parse_profile(std::string_view text) {
  ImpairmentProfile p;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    auto fail = [&](const std::string& what) {
      throw InputError("profile line " + std::to_string(line_no) + ": " + what);
    };
    std::string rest;
    if (first == "period" || first == "fault_at") {
      double v;
      if (!(fields >> v) || (fields >> rest)) fail("expected one number");
      (first == "period" ? p.period_s : p.fault_at_s) = v;
    } else if (first == "seed") {
      std::uint64_t v;
      if (!(fields >> v) || (fields >> rest)) fail("expected an unsigned seed");
      p.seed = v;
    } else if (first == "fault_direction") {
      std::string v;
      if (!(fields >> v) || (fields >> rest)) fail("expected both|up|down");
      if (v == "both") p.fault_direction = FaultDirection::kBoth;
      else if (v == "up") p.fault_direction = FaultDirection::kUp;
      else if (v == "down") p.fault_direction = FaultDirection::kDown;
      else fail("expected both|up|down");
    } else {
      Segment s;
      try {
        std::size_t used = 0;
        s.start_s = std::stod(first, &used);
        if (used != first.size()) fail("unknown key '" + first + "'");
      } catch (const std::logic_error&) {
        fail("unknown key '" + first + "'");
      }
      if (!(fields >> s.delay_up_ms >> s.delay_down_ms >> s.loss_up >> s.loss_down) ||
          (fields >> rest)) {
        fail("segment needs: start_s delay_up_ms delay_down_ms loss_up loss_down");
      }
      p.segments.push_back(s);
    }
  }
  p.validate();
  return p;
}

std::string format_profile(const ImpairmentProfile& profile) {
  std::ostringstream out;
  if (profile.period_s) out << "period " << number(*profile.period_s) << '\n';
  out << "seed " << profile.seed << '\n';
  if (profile.fault_at_s) {
    out << "fault_at " << number(*profile.fault_at_s) << '\n';
    static const char* const kDir[] = {"both", "up", "down"};
    out << "fault_direction " << kDir[static_cast<int>(profile.fault_direction)] << '\n';
  }
  for (const Segment& s : profile.segments) {
    out << number(s.start_s) << ' ' << number(s.delay_up_ms) << ' '
        << number(s.delay_down_ms) << ' ' << number(s.loss_up) << ' '
        << number(s.loss_down) << '\n';
  }
  return out.str();
}

ImpairmentProfile resolve_profile(const std::string& name_or_path,
                                  const ProfileOptions& options) {
  const auto names = library_profile_names();
  const std::string key = lower(name_or_path);
  for (const auto& n : names) {
    if (lower(n) == key) return library_profile(name_or_path, options);
  }
  std::ifstream file(name_or_path);
  if (!file) throw UnknownProfileError("unknown profile '" + name_or_path + "'");
  std::ostringstream text;
  text << file.rdbuf();
  return parse_profile(text.str());
}

BernoulliLoss::BernoulliLoss(std::uint64_t seed)
    : up_(seed * 2 + 1), down_(seed * 2 + 2) {}

bool BernoulliLoss::drop(Direction dir, std::uint64_t, double nominal_loss) {
  auto& rng = is_up(dir) ? up_ : down_;
  // Always draw so the stream position does not depend on the loss level.
  const double u = uniform01(rng);
  return u < nominal_loss;
}

GilbertElliottLoss::GilbertElliottLoss(std::uint64_t seed, Params params)
    : params_(params), rng_(seed) {}

bool GilbertElliottLoss::drop(Direction dir, std::uint64_t, double) {
  bool& bad = bad_[is_up(dir) ? 0 : 1];
  const double flip = uniform01(rng_);
  if (bad ? flip < params_.p_bad_to_good : flip < params_.p_good_to_bad) bad = !bad;
  return uniform01(rng_) < (bad ? params_.loss_bad : params_.loss_good);
}

PatternLoss::PatternLoss(std::uint64_t cycle, std::vector<std::uint64_t> drop_up,
                         std::vector<std::uint64_t> drop_down)
    : cycle_(cycle), up_(cycle, false), down_(cycle, false) {
  if (cycle == 0) throw InputError("pattern cycle must be positive");
  for (auto i : drop_up) up_.at(i) = true;
  for (auto i : drop_down) down_.at(i) = true;
}

bool PatternLoss::drop(Direction dir, std::uint64_t index, double) {
  return (is_up(dir) ? up_ : down_)[index % cycle_];
}

LinkEmulator::LinkEmulator(ImpairmentProfile profile, Time origin,
                           std::unique_ptr<LossModel> loss)
    : profile_(std::move(profile)), origin_(origin), loss_(std::move(loss)) {
  profile_.validate();
  if (!loss_) loss_ = std::make_unique<BernoulliLoss>(profile_.seed);
}

std::optional<Time> LinkEmulator::transmit(Direction dir, Time now) {
  const int i = index(dir);
  const std::uint64_t frame_index = offered_[i]++;
  const double t_s = to_seconds(now - origin_);
  if (profile_.faulted(dir, t_s)) {
    ++dropped_[i];
    return std::nullopt;
  }
  if (loss_->drop(dir, frame_index, profile_.loss(dir, t_s))) {
    ++dropped_[i];
    return std::nullopt;
  }
  return now + from_millis(profile_.delay_ms(dir, t_s));
}

std::optional<Delivery> LinkEmulator::transmit(Direction dir,
                                               std::vector<std::uint8_t> frame,
                                               Time now) {
  auto at = transmit(dir, now);
  if (!at) return std::nullopt;
  return Delivery{std::move(frame), *at};
}

}  // namespace kaprobe
