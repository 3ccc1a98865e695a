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

#include "kaprobe/events.hpp"

#include <charconv>

#include "kaprobe/errors.hpp"

namespace kaprobe {

std::string Address::to_string() const {
  return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xff) + "." +
         std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff) + ":" +
         std::to_string(port);
}

Address Address::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    throw InputError("address '" + std::string(text) + "' lacks a port");
  }
  auto host = text.substr(0, colon);
  auto port_text = text.substr(colon + 1);
  if (host == "localhost") host = "127.0.0.1";

  Address out;
  int octets = 0;
  std::size_t pos = 0;
  for (;;) {
    const auto dot = host.find('.', pos);
    const auto part = host.substr(pos, dot == std::string_view::npos ? host.size() - pos
                                                                     : dot - pos);
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (part.empty() || ec != std::errc() || ptr != part.data() + part.size() ||
        value > 255 || ++octets > 4) {
      throw InputError("bad IPv4 address '" + std::string(text) + "'");
    }
    out.ip = (out.ip << 8) | value;
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  if (octets != 4) throw InputError("bad IPv4 address '" + std::string(text) + "'");
  unsigned port = 0;
  auto [ptr, ec] =
      std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || ptr != port_text.data() + port_text.size() ||
      port_text.empty() || port > 65534) {
    throw InputError("bad port in '" + std::string(text) + "'");
  }
  out.port = static_cast<std::uint16_t>(port);
  return out;
}

std::vector<MeasurementRecord> MemorySink::measurements(Metric metric) const {
  std::lock_guard lock(mu_);
  std::vector<MeasurementRecord> out;
  for (const auto& r : measurements_) {
    if (r.metric == metric) out.push_back(r);
  }
  return out;
}

}  // namespace kaprobe
