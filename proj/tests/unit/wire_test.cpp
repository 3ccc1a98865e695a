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

#include <gtest/gtest.h>

#include <random>

#include "kaprobe/errors.hpp"
#include "kaprobe/time.hpp"
#include "kaprobe/wire.hpp"

namespace kaprobe {
namespace {

// Independent big-endian reference encoder.
std::vector<std::uint8_t> reference_encode(const ProbeBody& b) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t w : {b.seq, b.tsc, b.tss, b.dt, b.s_local, b.s_echo, b.r}) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back((w >> shift) & 0xff);
  }
  return out;
}

ProbeBody random_body(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> u;
  return ProbeBody{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
}

TEST(Wire, EncodesSevenBigEndianWords) {
  const ProbeBody b{1, 2, 3, 4, 5, 6, 0x01020304};
  const ProbeBytes bytes = encode_probe(b);
  ASSERT_EQ(bytes.size(), 28u);
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.begin(), bytes.end()), reference_encode(b));
  EXPECT_EQ(bytes[3], 1);
  EXPECT_EQ(bytes[24], 0x01);
  EXPECT_EQ(bytes[27], 0x04);
}

TEST(Wire, RoundTripsRandomBodies) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const ProbeBody b = random_body(rng);
    const ProbeBytes bytes = encode_probe(b);
    ASSERT_EQ(std::vector<std::uint8_t>(bytes.begin(), bytes.end()), reference_encode(b));
    ASSERT_EQ(decode_probe(bytes), b);
  }
}

TEST(Wire, DecodeRejectsWrongLength) {
  std::vector<std::uint8_t> short_body(27), long_body(29);
  EXPECT_THROW(decode_probe(short_body), LengthError);
  EXPECT_THROW(decode_probe(long_body), LengthError);
  EXPECT_THROW(decode_probe({}), LengthError);
}

TEST(Wire, InnerDatagramNeedsHeaderByte) {
  EXPECT_THROW(InnerDatagram(std::vector<std::uint8_t>{}), MalformedError);
  const auto d = InnerDatagram::make(std::vector<std::uint8_t>{9, 8});
  EXPECT_EQ(d.version(), 4);
  EXPECT_EQ(d.size(), 3u);
}

TEST(Piggyback, AttachAppendsTrailerAndSetsVersion) {
  std::vector<std::uint8_t> payload(100, 0xab);
  const auto inner = InnerDatagram::make(payload);
  const ProbeBody b{10, 20, 30, 40, 50, 60, 70};
  const auto framed = attach_piggyback(inner, b, 1472);
  ASSERT_TRUE(framed);
  EXPECT_EQ(framed->size(), inner.size() + 28);
  EXPECT_EQ(framed->version(), 15);
  // low nibble of the header byte is untouched
  EXPECT_EQ(framed->bytes()[0] & 0x0f, inner.bytes()[0] & 0x0f);
  const auto tail = framed->bytes().subspan(framed->size() - 28);
  EXPECT_EQ(std::vector<std::uint8_t>(tail.begin(), tail.end()), reference_encode(b));
}

TEST(Piggyback, RoundTripProperty) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 1400);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::uint8_t> bytes(1 + len(rng));
    for (auto& x : bytes) x = static_cast<std::uint8_t>(byte(rng));
    bytes[0] = static_cast<std::uint8_t>((bytes[0] & 0x0f) | 0x40);
    const InnerDatagram inner(bytes);
    const ProbeBody b = random_body(rng);
    const auto framed = attach_piggyback(inner, b, 1472);
    ASSERT_TRUE(framed);
    const auto parts = extract_piggyback(*framed);
    ASSERT_TRUE(parts);
    ASSERT_EQ(parts->first, inner);
    ASSERT_EQ(parts->first.version(), 4);
    ASSERT_EQ(parts->second, b);
  }
}

TEST(Piggyback, BudgetIsInclusive) {
  const auto inner = InnerDatagram::make(std::vector<std::uint8_t>(99));
  EXPECT_TRUE(attach_piggyback(inner, {}, 128));
  EXPECT_FALSE(attach_piggyback(inner, {}, 127));
}

TEST(Piggyback, AttachRequiresVersionFour) {
  const auto inner = InnerDatagram::make(std::vector<std::uint8_t>(4), 6);
  EXPECT_THROW(attach_piggyback(inner, {}, 1472), VersionError);
}

TEST(Piggyback, ExtractPassesPlainDataThrough) {
  const auto inner = InnerDatagram::make(std::vector<std::uint8_t>(4));
  EXPECT_FALSE(extract_piggyback(inner));
}

TEST(Piggyback, ExtractRejectsOtherVersionsAndTruncation) {
  EXPECT_THROW(extract_piggyback(InnerDatagram::make(std::vector<std::uint8_t>(40), 6)),
               VersionError);
  EXPECT_THROW(extract_piggyback(InnerDatagram::make(std::vector<std::uint8_t>(27), 15)),
               MalformedError);
  // header byte plus a bare trailer is the smallest valid frame
  EXPECT_TRUE(extract_piggyback(InnerDatagram::make(std::vector<std::uint8_t>(28), 15)));
}

TEST(Classify, ProbeChannelUsesDirection) {
  const ProbeBytes b = encode_probe({});
  EXPECT_EQ(classify_frame(Channel::kProbe, Direction::kClientToServer, b),
            FrameKind::kProbeRequest);
  EXPECT_EQ(classify_frame(Channel::kProbe, Direction::kServerToClient, b),
            FrameKind::kProbeResponse);
  std::vector<std::uint8_t> wrong(30);
  EXPECT_THROW(classify_frame(Channel::kProbe, Direction::kClientToServer, wrong),
               MalformedError);
}

TEST(Classify, DataChannelUsesVersionNibble) {
  const auto plain = InnerDatagram::make(std::vector<std::uint8_t>(10));
  const auto framed = *attach_piggyback(plain, {}, 1472);
  EXPECT_EQ(classify_frame(Channel::kData, Direction::kClientToServer, plain.bytes()),
            FrameKind::kData);
  EXPECT_EQ(classify_frame(Channel::kData, Direction::kClientToServer, framed.bytes()),
            FrameKind::kDataPiggybackedRequest);
  EXPECT_EQ(classify_frame(Channel::kData, Direction::kServerToClient, framed.bytes()),
            FrameKind::kDataPiggybackedResponse);
  std::vector<std::uint8_t> v6{0x60, 0, 0};
  EXPECT_THROW(classify_frame(Channel::kData, Direction::kClientToServer, v6), VersionError);
  EXPECT_THROW(classify_frame(Channel::kData, Direction::kClientToServer, {}), MalformedError);
  std::vector<std::uint8_t> truncated(20, 0xf0);
  EXPECT_THROW(classify_frame(Channel::kData, Direction::kClientToServer, truncated),
               MalformedError);
}

TEST(WireTime, MillisecondWordWraps) {
  EXPECT_EQ(wire_ms(Time(1999)), 1u);
  EXPECT_EQ(wire_ms(Time((std::int64_t{1} << 32) * 1000 + 5000)), 5u);
  EXPECT_EQ(wire_diff(3, 0xfffffffe), 5u);
}

}  // namespace
}  // namespace kaprobe
