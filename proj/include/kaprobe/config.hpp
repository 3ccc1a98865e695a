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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kaprobe/engine.hpp"
#include "kaprobe/log.hpp"

namespace kaprobe {

// Sets one per-session key ("t_ka_ms", "k", ...). Returns false for a key that
// is not a session key; throws ConfigError on a bad value.
bool apply_session_key(SessionConfig& config, std::string_view key, std::string_view value);
std::vector<std::string> session_keys();
std::vector<std::string> global_keys();

// Flat "key = value" text. Global keys come first; each "[session]" header
// starts a client session block that may repeat any session key. Later
// overrides (command-line flags) beat the file, sessions included.
class RunConfig {
 public:
  // Throws ConfigError naming the offending line.
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string& path);

  // Override from a flag; the key must be a global or session key.
  void set(std::string_view key, std::string_view value);
  // Adds a session block targeting `peer`.
  void add_peer(std::string_view peer);

  std::optional<std::string> get(std::string_view key) const;

  SessionConfig session_defaults() const;
  std::vector<SessionConfig> sessions() const;
  Address bind(const Address& fallback) const;
  LogFormat log_format() const;
  std::string out() const;
  std::uint64_t seed() const;
  double duration_s() const;
  std::uint16_t control_port() const;
  double data_rate_pps() const;
  std::size_t data_size() const;
  std::string profile() const;
  std::optional<Address> listen() const;
  std::optional<Address> upstream() const;
  bool accept_unknown() const;

  // Checks everything `verb` (server, client, relay) needs. Throws ConfigError.
  void validate(std::string_view verb) const;

 private:
  using Block = std::map<std::string, std::string, std::less<>>;
  static void check_key(std::string_view key, bool in_section);
  SessionConfig build(const Block* section) const;

  Block globals_;
  std::vector<Block> sections_;
  Block overrides_;
};

}  // namespace kaprobe
