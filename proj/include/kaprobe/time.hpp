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

#include <chrono>
#include <cmath>
#include <cstdint>

namespace kaprobe {

// All engine and emulator time is expressed as a microsecond offset from an
// arbitrary per-clock epoch. Virtual-time harnesses and the steady clock share
// this representation.
using Time = std::chrono::microseconds;

using namespace std::chrono_literals;

// Millisecond timestamp word carried on the wire: truncated to 32 bits.
constexpr std::uint32_t wire_ms(Time t) noexcept {
  return static_cast<std::uint32_t>(
      static_cast<std::uint64_t>(t.count() / 1000) & 0xffffffffULL);
}

// Wrap-safe difference of two millisecond words.
constexpr std::uint32_t wire_diff(std::uint32_t later,
                                  std::uint32_t earlier) noexcept {
  return later - earlier;
}

constexpr double to_seconds(Time t) noexcept {
  return static_cast<double>(t.count()) * 1e-6;
}

constexpr double to_millis(Time t) noexcept {
  return static_cast<double>(t.count()) * 1e-3;
}

inline Time from_seconds(double s) {
  return Time(static_cast<std::int64_t>(std::llround(s * 1e6)));
}

inline Time from_millis(double ms) {
  return Time(static_cast<std::int64_t>(std::llround(ms * 1e3)));
}

}  // namespace kaprobe
