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

#include "kaprobe/wire.hpp"

#include <string>

#include "kaprobe/errors.hpp"

namespace kaprobe {
namespace {

void put_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

}  // namespace

void encode_probe(const ProbeBody& body,
                  std::span<std::uint8_t, kProbeBodySize> out) {
  std::uint8_t* p = out.data();
  put_u32(p + 0, body.seq);
  put_u32(p + 4, body.tsc);
  put_u32(p + 8, body.tss);
  put_u32(p + 12, body.dt);
  put_u32(p + 16, body.s_local);
  put_u32(p + 20, body.s_echo);
  put_u32(p + 24, body.r);
}

ProbeBytes encode_probe(const ProbeBody& body) {
  ProbeBytes out{};
  encode_probe(body, out);
  return out;
}

ProbeBody decode_probe(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kProbeBodySize) {
    throw LengthError("probe body must be 28 bytes, got " +
                      std::to_string(bytes.size()));
  }
  const std::uint8_t* p = bytes.data();
  ProbeBody body;
  body.seq = get_u32(p + 0);
  body.tsc = get_u32(p + 4);
  body.tss = get_u32(p + 8);
  body.dt = get_u32(p + 12);
  body.s_local = get_u32(p + 16);
  body.s_echo = get_u32(p + 20);
  body.r = get_u32(p + 24);
  return body;
}

const char* frame_kind_name(FrameKind kind) {
  switch (kind) {
    case FrameKind::kProbeRequest: return "probe-request";
    case FrameKind::kProbeResponse: return "probe-response";
    case FrameKind::kData: return "data";
    case FrameKind::kDataPiggybackedRequest: return "data+request";
    case FrameKind::kDataPiggybackedResponse: return "data+response";
  }
  return "unknown";
}

InnerDatagram::InnerDatagram(std::vector<std::uint8_t> bytes)
    : bytes_(std::move(bytes)) {
  if (bytes_.empty()) throw MalformedError("inner datagram has no header byte");
}

InnerDatagram InnerDatagram::make(std::span<const std::uint8_t> payload,
                                  std::uint8_t version) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(payload.size() + 1);
  bytes.push_back(static_cast<std::uint8_t>(version << 4));
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  return InnerDatagram(std::move(bytes));
}

void InnerDatagram::set_version(std::uint8_t version) noexcept {
  bytes_[0] = static_cast<std::uint8_t>((bytes_[0] & 0x0f) | (version << 4));
}

std::optional<InnerDatagram> attach_piggyback(const InnerDatagram& inner,
                                              const ProbeBody& body,
                                              std::size_t mtu_budget) {
  if (inner.version() != kIpv4Version) {
    throw VersionError("piggyback requires version 4, got " +
                       std::to_string(inner.version()));
  }
  if (inner.size() + kProbeBodySize > mtu_budget) return std::nullopt;

  std::vector<std::uint8_t> bytes;
  bytes.reserve(inner.size() + kProbeBodySize);
  bytes.assign(inner.bytes().begin(), inner.bytes().end());
  const ProbeBytes trailer = encode_probe(body);
  bytes.insert(bytes.end(), trailer.begin(), trailer.end());
  InnerDatagram out(std::move(bytes));
  out.set_version(kPiggybackVersion);
  return out;
}

std::optional<std::pair<InnerDatagram, ProbeBody>> extract_piggyback(
    const InnerDatagram& inner) {
  switch (inner.version()) {
    case kIpv4Version:
      return std::nullopt;
    case kPiggybackVersion:
      break;
    default:
      throw VersionError("unexpected version nibble " +
                         std::to_string(inner.version()));
  }
  if (inner.size() < kProbeBodySize + 1) {
    throw MalformedError("piggybacked datagram of " +
                         std::to_string(inner.size()) + " bytes");
  }
  const auto all = inner.bytes();
  const std::size_t split = all.size() - kProbeBodySize;
  ProbeBody body = decode_probe(all.subspan(split));
  InnerDatagram restored(std::vector<std::uint8_t>(all.begin(), all.begin() + split));
  restored.set_version(kIpv4Version);
  return std::make_pair(std::move(restored), body);
}

FrameKind classify_frame(Channel channel, Direction direction,
                         std::span<const std::uint8_t> bytes) {
  const bool to_server = direction == Direction::kClientToServer;
  if (channel == Channel::kProbe) {
    if (bytes.size() != kProbeBodySize) {
      throw MalformedError("probe frame of " + std::to_string(bytes.size()) +
                           " bytes");
    }
    return to_server ? FrameKind::kProbeRequest : FrameKind::kProbeResponse;
  }
  if (bytes.empty()) throw MalformedError("empty data frame");
  const std::uint8_t version = bytes[0] >> 4;
  if (version == kIpv4Version) return FrameKind::kData;
  if (version == kPiggybackVersion) {
    if (bytes.size() < kProbeBodySize + 1) {
      throw MalformedError("truncated piggybacked frame");
    }
    return to_server ? FrameKind::kDataPiggybackedRequest
                     : FrameKind::kDataPiggybackedResponse;
  }
  throw VersionError("unexpected version nibble " + std::to_string(version));
}

}  // namespace kaprobe
