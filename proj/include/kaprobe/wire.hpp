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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace kaprobe {

inline constexpr std::size_t kProbeBodySize = 28;
inline constexpr std::uint8_t kIpv4Version = 4;
inline constexpr std::uint8_t kPiggybackVersion = 15;

// Measurement words carried by every probe and piggyback trailer. The field
// meaning depends on direction:
//
//   field     request (client -> server)   response (server -> client)
//   tsc       t_sc(k)                      t_sc(k) echoed
//   tss       t_ss(k_prev)                 t_ss(k)
//   dt        t_sc(k) - t_rc(k_prev)       t_ss(k) - t_rs(k)
//   s_local   Sc(k)                        Ss(k)
//   s_echo    Ss(k_prev)                   Sc(k) echoed
//   r         Rc(k_prev)                   Rs(k)
struct ProbeBody {
  std::uint32_t seq = 0;
  std::uint32_t tsc = 0;
  std::uint32_t tss = 0;
  std::uint32_t dt = 0;
  std::uint32_t s_local = 0;
  std::uint32_t s_echo = 0;
  std::uint32_t r = 0;

  friend bool operator==(const ProbeBody&, const ProbeBody&) = default;
};

using ProbeBytes = std::array<std::uint8_t, kProbeBodySize>;

ProbeBytes encode_probe(const ProbeBody& body);
void encode_probe(const ProbeBody& body, std::span<std::uint8_t, kProbeBodySize> out);

// Throws LengthError unless exactly kProbeBodySize bytes are supplied.
ProbeBody decode_probe(std::span<const std::uint8_t> bytes);

// Which of the endpoint's two UDP ports a datagram used. Probes travel on the
// probe port, encapsulated traffic on the data port.
enum class Channel : std::uint8_t { kProbe, kData };

enum class Direction : std::uint8_t { kClientToServer, kServerToClient };

enum class FrameKind {
  kProbeRequest,
  kProbeResponse,
  kData,
  kDataPiggybackedRequest,
  kDataPiggybackedResponse,
};

const char* frame_kind_name(FrameKind kind);

// Synthetic inner datagram: one header byte whose high nibble is the version
// field, followed by opaque payload.
class InnerDatagram {
 public:
  // Throws MalformedError on an empty buffer.
  explicit InnerDatagram(std::vector<std::uint8_t> bytes);

  static InnerDatagram make(std::span<const std::uint8_t> payload,
                            std::uint8_t version = kIpv4Version);

  std::uint8_t version() const noexcept { return bytes_[0] >> 4; }
  void set_version(std::uint8_t version) noexcept;
  std::size_t size() const noexcept { return bytes_.size(); }
  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::span<const std::uint8_t> payload() const noexcept {
    return std::span<const std::uint8_t>(bytes_).subspan(1);
  }
  std::vector<std::uint8_t> release() && { return std::move(bytes_); }

  friend bool operator==(const InnerDatagram&, const InnerDatagram&) = default;

 private:
  std::vector<std::uint8_t> bytes_;
};

// Returns the datagram with the trailer appended and the version nibble set
// to 15, or nullopt if the result would exceed `mtu_budget` bytes.
// Throws VersionError when the inner version is not 4.
std::optional<InnerDatagram> attach_piggyback(const InnerDatagram& inner,
                                              const ProbeBody& body,
                                              std::size_t mtu_budget);

// nullopt for a plain version-4 datagram. Throws MalformedError for a
// version-15 datagram too short to hold a header plus trailer, VersionError for
// any other version nibble.
std::optional<std::pair<InnerDatagram, ProbeBody>> extract_piggyback(
    const InnerDatagram& inner);

// Decides the frame kind from the port it arrived on, its direction and (for
// data frames) the version nibble. Throws MalformedError/VersionError for
// frames that are not valid for the channel.
FrameKind classify_frame(Channel channel, Direction direction,
                         std::span<const std::uint8_t> bytes);

}  // namespace kaprobe
