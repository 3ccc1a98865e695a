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

#include "kaprobe/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kaprobe/errors.hpp"

namespace kaprobe {
namespace {

const char* const kSessionKeys[] = {
    "peer",       "t_ka_ms",        "k",         "n",         "alpha",
    "piggyback",  "mtu_budget",     "rtt_ceiling_ms",         "recovery_responses",
    "rtt_tau_s",  "owl_tau_s",      "rtl_tau_s", "rtt_tau_worse_s", "rtt_tau_better_s"};

const char* const kGlobalKeys[] = {
    "bind",          "log_format", "out",     "seed",    "duration_s",
    "control_port",  "data_rate_pps", "data_size", "profile", "listen",
    "upstream",      "accept_unknown"};

bool contains(const char* const* begin, const char* const* end, std::string_view key) {
  return std::any_of(begin, end, [&](const char* k) { return key == k; });
}

bool is_session_key(std::string_view key) {
  return contains(std::begin(kSessionKeys), std::end(kSessionKeys), key);
}

bool is_global_key(std::string_view key) {
  return contains(std::begin(kGlobalKeys), std::end(kGlobalKeys), key);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    ": expected " + expected);
}

long long to_int(std::string_view key, std::string_view value) {
  long long v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size()) bad_value(key, value, "an integer");
  return v;
}

double to_double(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    bad_value(key, value, "a number");
  }
  return v;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "on" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "off" || value == "no" || value == "0") return false;
  bad_value(key, value, "a boolean");
}

Address to_address(std::string_view key, std::string_view value) {
  try {
    return Address::parse(value);
  } catch (const InputError&) {
    bad_value(key, value, "an address a.b.c.d:port");
  }
}

Time ms_time(std::string_view key, std::string_view value) {
  const double ms = to_double(key, value);
  if (!(ms > 0.0) || ms > 1e9) bad_value(key, value, "a positive duration in ms");
  return from_millis(ms);
}

double positive(std::string_view key, std::string_view value) {
  const double v = to_double(key, value);
  if (!(v > 0.0)) bad_value(key, value, "a positive number");
  return v;
}

}  // namespace

std::vector<std::string> session_keys() {
  return {std::begin(kSessionKeys), std::end(kSessionKeys)};
}

std::vector<std::string> global_keys() {
  return {std::begin(kGlobalKeys), std::end(kGlobalKeys)};
}

bool apply_session_key(SessionConfig& c, std::string_view key, std::string_view value) {
  if (key == "peer") {
    c.peer = to_address(key, value);
  } else if (key == "t_ka_ms") {
    c.t_ka = ms_time(key, value);
  } else if (key == "k") {
    const long long v = to_int(key, value);
    if (v < 1 || v > 1000000) bad_value(key, value, "an integer >= 1");
    c.k = static_cast<int>(v);
  } else if (key == "n") {
    const long long v = to_int(key, value);
    if (v < 1 || v > 1000000) bad_value(key, value, "an integer >= 1");
    c.n = static_cast<int>(v);
  } else if (key == "alpha") {
    const double v = to_double(key, value);
    if (!(v > 0.0 && v < 1.0)) bad_value(key, value, "a fraction in (0, 1)");
    c.alpha = v;
  } else if (key == "piggyback") {
    c.piggyback = to_bool(key, value);
  } else if (key == "mtu_budget") {
    const long long v = to_int(key, value);
    if (v <= static_cast<long long>(kProbeBodySize) + 1 || v > 65507) {
      bad_value(key, value, "a byte count in [30, 65507]");
    }
    c.mtu_budget = static_cast<std::size_t>(v);
  } else if (key == "rtt_ceiling_ms") {
    c.rtt_ceiling = ms_time(key, value);
  } else if (key == "recovery_responses") {
    const long long v = to_int(key, value);
    if (v < 1 || v > 1000000) bad_value(key, value, "an integer >= 1");
    c.recovery_responses = static_cast<int>(v);
  } else if (key == "rtt_tau_s") {
    c.rtt_ewma = EwmaConfig::symmetric(positive(key, value));
  } else if (key == "owl_tau_s") {
    c.owl_ewma = EwmaConfig::symmetric(positive(key, value));
  } else if (key == "rtl_tau_s") {
    c.rtl_ewma = EwmaConfig::symmetric(positive(key, value));
  } else if (key == "rtt_tau_worse_s" || key == "rtt_tau_better_s") {
    const double v = positive(key, value);
    EwmaConfig e = c.rtt_ewma.value_or(
        EwmaConfig::symmetric(tau_from_alpha(c.alpha, to_seconds(c.t_ka))));
    e.worse = WorseDirection::kIncrease;
    (key == "rtt_tau_worse_s" ? e.tau_up_s : e.tau_down_s) = v;
    c.rtt_ewma = e;
  } else {
    return false;
  }
  return true;
}

void RunConfig::check_key(std::string_view key, bool in_section) {
  if (is_session_key(key)) return;
  if (!in_section && is_global_key(key)) return;
  throw ConfigError("unknown key '" + std::string(key) + "'" +
                    (in_section ? " in [session]" : ""));
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  Block* block = &cfg.globals_;
  bool in_section = false;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line != "[session]") throw ConfigError(where + "unknown section " + std::string(line));
      cfg.sections_.emplace_back();
      block = &cfg.sections_.back();
      in_section = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    try {
      check_key(key, in_section);
      if (block->count(key)) throw ConfigError("duplicate key '" + key + "'");
      // Values are checked now so errors carry the line number.
      SessionConfig scratch;
      RunConfig probe;
      probe.globals_[key] = value;
      if (!apply_session_key(scratch, key, value)) probe.validate("");
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
    (*block)[key] = value;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::set(std::string_view key, std::string_view value) {
  check_key(key, false);
  if (key == "peer") {
    add_peer(value);
    return;
  }
  overrides_[std::string(key)] = std::string(value);
}

void RunConfig::add_peer(std::string_view peer) {
  to_address("peer", peer);
  sections_.push_back(Block{{"peer", std::string(peer)}});
}

std::optional<std::string> RunConfig::get(std::string_view key) const {
  if (auto it = overrides_.find(key); it != overrides_.end()) return it->second;
  if (auto it = globals_.find(key); it != globals_.end()) return it->second;
  return std::nullopt;
}

SessionConfig RunConfig::build(const Block* section) const {
  SessionConfig c;
  // Order matters for derived keys: t_ka and alpha before the tau pair.
  auto apply_all = [&](const Block& b) {
    for (const char* first : {"t_ka_ms", "alpha"}) {
      if (auto it = b.find(first); it != b.end()) apply_session_key(c, it->first, it->second);
    }
    for (const auto& [k, v] : b) {
      if (k == "t_ka_ms" || k == "alpha") continue;
      if (section == nullptr && k == "peer") continue;
      apply_session_key(c, k, v);
    }
  };
  Block global_session;
  for (const auto& [k, v] : globals_) {
    if (is_session_key(k)) global_session[k] = v;
  }
  apply_all(global_session);
  if (section) apply_all(*section);
  Block over;
  for (const auto& [k, v] : overrides_) {
    if (is_session_key(k)) over[k] = v;
  }
  apply_all(over);
  return c;
}

SessionConfig RunConfig::session_defaults() const { return build(nullptr); }

std::vector<SessionConfig> RunConfig::sessions() const {
  std::vector<SessionConfig> out;
  if (auto p = globals_.find("peer"); p != globals_.end()) {
    Block b{{"peer", p->second}};
    out.push_back(build(&b));
  }
  for (const auto& s : sections_) {
    if (!s.count("peer")) throw ConfigError("[session] block without peer");
    out.push_back(build(&s));
  }
  for (auto& s : out) s.role = Role::kClient;
  return out;
}

Address RunConfig::bind(const Address& fallback) const {
  auto v = get("bind");
  return v ? to_address("bind", *v) : fallback;
}

LogFormat RunConfig::log_format() const {
  auto v = get("log_format");
  return v ? parse_log_format(*v) : LogFormat::kCsv;
}

std::string RunConfig::out() const { return get("out").value_or(""); }

std::uint64_t RunConfig::seed() const {
  auto v = get("seed");
  if (!v) return 1;
  const long long s = to_int("seed", *v);
  if (s < 0) bad_value("seed", *v, "a non-negative integer");
  return static_cast<std::uint64_t>(s);
}

double RunConfig::duration_s() const {
  auto v = get("duration_s");
  if (!v) return 0.0;
  const double d = to_double("duration_s", *v);
  if (d < 0.0) bad_value("duration_s", *v, "a non-negative number");
  return d;
}

std::uint16_t RunConfig::control_port() const {
  auto v = get("control_port");
  if (!v) return 0;
  const long long p = to_int("control_port", *v);
  if (p < 0 || p > 65535) bad_value("control_port", *v, "a port number");
  return static_cast<std::uint16_t>(p);
}

double RunConfig::data_rate_pps() const {
  auto v = get("data_rate_pps");
  if (!v) return 0.0;
  const double r = to_double("data_rate_pps", *v);
  if (r < 0.0 || r > 1e6) bad_value("data_rate_pps", *v, "a rate in [0, 1e6]");
  return r;
}

std::size_t RunConfig::data_size() const {
  auto v = get("data_size");
  if (!v) return 64;
  const long long n = to_int("data_size", *v);
  if (n < 0 || n > 65000) bad_value("data_size", *v, "a byte count in [0, 65000]");
  return static_cast<std::size_t>(n);
}

std::string RunConfig::profile() const { return get("profile").value_or(""); }

std::optional<Address> RunConfig::listen() const {
  auto v = get("listen");
  if (!v) return std::nullopt;
  return to_address("listen", *v);
}

std::optional<Address> RunConfig::upstream() const {
  auto v = get("upstream");
  if (!v) return std::nullopt;
  return to_address("upstream", *v);
}

bool RunConfig::accept_unknown() const {
  auto v = get("accept_unknown");
  return v ? to_bool("accept_unknown", *v) : true;
}

void RunConfig::validate(std::string_view verb) const {
  bind(Address{});
  log_format();
  seed();
  duration_s();
  control_port();
  data_rate_pps();
  data_size();
  listen();
  upstream();
  accept_unknown();
  session_defaults().validate();
  const auto list = sessions();
  for (const auto& s : list) s.validate();
  // Sessions can also be added later over the control channel.
  if (verb == "client" && list.empty() && control_port() == 0) {
    throw ConfigError("client needs at least one peer or a control port");
  }
  if (verb == "relay" && !upstream()) throw ConfigError("relay needs upstream");
}

}  // namespace kaprobe
