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

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kaprobe/config.hpp"
#include "kaprobe/errors.hpp"
#include "kaprobe/log.hpp"

namespace kaprobe {
namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out(1);
  for (char c : s) {
    if (c == sep) {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

TEST(Config, ParsesGlobalsAndSessions) {
  const RunConfig c = RunConfig::parse(R"(
# defaults for every session
t_ka_ms = 100
k = 5
bind = 127.0.0.1:47010
log_format = jsonl
seed = 42

[session]
peer = 10.0.0.1:47000
alpha = 0.6

[session]
peer = 10.0.0.2:47000   # trailing comment
k = 2
piggyback = on
)");
  const auto sessions = c.sessions();
  ASSERT_EQ(sessions.size(), 2u);
  EXPECT_EQ(sessions[0].peer.to_string(), "10.0.0.1:47000");
  EXPECT_EQ(sessions[0].t_ka, 100ms);
  EXPECT_EQ(sessions[0].k, 5);
  EXPECT_EQ(sessions[0].alpha, 0.6);
  EXPECT_EQ(sessions[1].k, 2);
  EXPECT_TRUE(sessions[1].piggyback);
  EXPECT_EQ(c.bind(Address{}).port, 47010);
  EXPECT_EQ(c.log_format(), LogFormat::kJsonl);
  EXPECT_EQ(c.seed(), 42u);
  EXPECT_NO_THROW(c.validate("client"));
}

TEST(Config, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.seed(), 1u);
  EXPECT_EQ(c.log_format(), LogFormat::kCsv);
  EXPECT_EQ(c.data_size(), 64u);
  EXPECT_TRUE(c.accept_unknown());
  EXPECT_EQ(c.bind(Address::loopback(5)).port, 5);
  EXPECT_EQ(c.session_defaults().k, 3);
  EXPECT_THROW(c.validate("client"), ConfigError);
  EXPECT_NO_THROW(c.validate("server"));
  EXPECT_THROW(c.validate("relay"), ConfigError);
}

TEST(Config, FlagsOverrideFileAndSections) {
  RunConfig c = RunConfig::parse("k = 5\n[session]\npeer = 1.2.3.4:5\nk = 9\n");
  c.set("k", "4");
  c.set("t_ka_ms", "50");
  c.set("peer", "1.2.3.5:7");
  const auto s = c.sessions();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].k, 4);
  EXPECT_EQ(s[1].k, 4);
  EXPECT_EQ(s[1].t_ka, 50ms);
  EXPECT_EQ(c.get("k"), "4");
}

TEST(Config, TauKeysAreIndependentOfOrder) {
  const RunConfig a = RunConfig::parse("rtt_tau_worse_s = 0.1\nt_ka_ms = 100\n");
  const RunConfig b = RunConfig::parse("t_ka_ms = 100\nrtt_tau_worse_s = 0.1\n");
  const auto ea = *a.session_defaults().rtt_ewma, eb = *b.session_defaults().rtt_ewma;
  EXPECT_EQ(ea.tau_up_s, 0.1);
  EXPECT_EQ(ea.tau_down_s, eb.tau_down_s);
  EXPECT_NEAR(ea.tau_down_s, tau_from_alpha(0.8, 0.1), 1e-12);
}

TEST(Config, RejectsWithLineNumbers) {
  auto error_of = [](const char* text) -> std::string {
    try {
      RunConfig::parse(text);
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(error_of("k = 3\nbogus = 1\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("k = 0\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("k = 3\nk = 4\n").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of("[global]\n").find("unknown section"), std::string::npos);
  EXPECT_NE(error_of("[session]\nbind = 1.2.3.4:5\n").find("[session]"), std::string::npos);
  EXPECT_NE(error_of("just words\n").find("key = value"), std::string::npos);
  EXPECT_NE(error_of("alpha = 1.5\n"), "");
  EXPECT_NE(error_of("t_ka_ms = -4\n"), "");
  EXPECT_NE(error_of("piggyback = maybe\n"), "");
  EXPECT_NE(error_of("log_format = xml\n"), "");
  EXPECT_NE(error_of("bind = 1.2.3.4\n"), "");
  EXPECT_NE(error_of("bind = 1.2.3.4:65535\n"), "");
  EXPECT_NE(error_of("seed = -1\n"), "");
  EXPECT_NE(error_of("data_rate_pps = fast\n"), "");
}

TEST(Config, SectionWithoutPeerIsInvalid) {
  const RunConfig c = RunConfig::parse("[session]\nk = 2\n");
  EXPECT_THROW(c.sessions(), ConfigError);
}

TEST(Config, SetRejectsUnknownKeys) {
  RunConfig c;
  EXPECT_THROW(c.set("nonsense", "1"), ConfigError);
  EXPECT_THROW(c.set("peer", "not-an-address"), ConfigError);
}

TEST(Config, LoadsFiles) {
  const std::string path = ::testing::TempDir() + "/kaprobe_config_test.conf";
  {
    std::ofstream f(path);
    f << "upstream = 127.0.0.1:47000\nlisten = 127.0.0.1:47300\n";
  }
  const RunConfig c = RunConfig::load(path);
  EXPECT_EQ(c.upstream()->port, 47000);
  EXPECT_EQ(c.listen()->port, 47300);
  EXPECT_NO_THROW(c.validate("relay"));
  std::remove(path.c_str());
  EXPECT_THROW(RunConfig::load(path), ConfigError);
}

TEST(Config, KeyListsAreDisjoint) {
  for (const auto& s : session_keys()) {
    for (const auto& g : global_keys()) EXPECT_NE(s, g);
  }
}

TEST(Address, ParseAndFormat) {
  const Address a = Address::parse("192.168.1.20:47000");
  EXPECT_EQ(a.ip, 0xc0a80114u);
  EXPECT_EQ(a.port, 47000);
  EXPECT_EQ(a.to_string(), "192.168.1.20:47000");
  for (const char* bad : {"", "1.2.3:4", "1.2.3.4.5:6", "1.2.3.256:1", "1.2.3.4:",
                          "1.2.3.4:65535", "a.b.c.d:1", "1.2.3.4:-1"}) {
    EXPECT_ANY_THROW(Address::parse(bad)) << bad;
  }
}

// Golden schema: field names and order are part of the log contract.
TEST(Log, CsvHeaderGolden) {
  EXPECT_EQ(csv_header(), "time_ms,session,event,metric,raw,ewma,status,prev_status");
}

TEST(Log, CsvRecordsGolden) {
  const MeasurementRecord m{7, Time(1'234'567), Metric::kOwlClient, 0.1, 0.0625};
  EXPECT_EQ(format_csv(m), "1234.567,7,measurement,owl_c,0.1,0.0625,,");
  const StatusRecord s{7, Time(2'000'000), LinkStatus::kUp, LinkStatus::kDown};
  EXPECT_EQ(format_csv(s), "2000.000,7,status,,,,down,up");
}

TEST(Log, JsonlRecordsGolden) {
  const MeasurementRecord m{3, Time(5'000), Metric::kRtt, 100.0, 99.5};
  EXPECT_EQ(format_jsonl(m),
            "{\"time_ms\":5.000,\"session\":3,\"event\":\"measurement\",\"metric\":\"rtt\","
            "\"raw\":100,\"ewma\":99.5,\"status\":null,\"prev_status\":null}");
  const StatusRecord s{3, Time(6'000), LinkStatus::kUnknown, LinkStatus::kUp};
  EXPECT_EQ(format_jsonl(s),
            "{\"time_ms\":6.000,\"session\":3,\"event\":\"status\",\"metric\":null,"
            "\"raw\":null,\"ewma\":null,\"status\":\"up\",\"prev_status\":\"unknown\"}");
}

TEST(Log, CsvAndJsonCarryTheSameFields) {
  const MeasurementRecord m{12, Time(987'654'321), Metric::kRtl, 0.0975, 0.1000001};
  const StatusRecord s{12, Time(987'654'999), LinkStatus::kUp, LinkStatus::kDown};
  auto compare = [](const std::string& csv, const std::string& jsonl) {
    const auto cells = split(csv, ',');
    const auto j = nlohmann::json::parse(jsonl);
    ASSERT_EQ(cells.size(), std::size(kLogFields));
    ASSERT_EQ(j.size(), std::size(kLogFields));
    for (std::size_t f = 0; f < std::size(kLogFields); ++f) {
      const auto& v = j.at(std::string(kLogFields[f]));
      if (v.is_null()) {
        EXPECT_EQ(cells[f], "") << kLogFields[f];
      } else if (v.is_string()) {
        EXPECT_EQ(cells[f], v.get<std::string>()) << kLogFields[f];
      } else {
        EXPECT_DOUBLE_EQ(std::stod(cells[f]), v.get<double>()) << kLogFields[f];
      }
    }
  };
  compare(format_csv(m), format_jsonl(m));
  compare(format_csv(s), format_jsonl(s));
}

TEST(Log, JsonKeyOrderFollowsSchema) {
  const std::string line = format_jsonl(MeasurementRecord{});
  std::size_t pos = 0;
  for (auto f : kLogFields) {
    const auto at = line.find("\"" + std::string(f) + "\":", pos);
    ASSERT_NE(at, std::string::npos) << f;
    pos = at;
  }
}

TEST(Log, WriterFormats) {
  std::ostringstream csv, jsonl;
  {
    LogWriter w(csv, LogFormat::kCsv);
    w.on_measurement({1, Time(1000), Metric::kRtt, 1.0, 1.0});
    w.on_status({1, Time(2000), LinkStatus::kUnknown, LinkStatus::kUp});
    EXPECT_EQ(w.records(), 2u);
  }
  {
    LogWriter w(jsonl, LogFormat::kJsonl);
    w.on_measurement({1, Time(1000), Metric::kRtt, 1.0, 1.0});
  }
  EXPECT_EQ(csv.str(), csv_header() + "\n1.000,1,measurement,rtt,1,1,,\n2.000,1,status,,,,up,unknown\n");
  EXPECT_EQ(jsonl.str().find("{\"time_ms\":1.000"), 0u);
  EXPECT_THROW(parse_log_format("xml"), ConfigError);
  EXPECT_STREQ(log_format_name(parse_log_format("jsonl")), "jsonl");
}

TEST(Log, AsyncWriterForwardsInOrder) {
  std::ostringstream out;
  LogWriter w(out, LogFormat::kCsv);
  AsyncLogWriter async(w, 1 << 16);
  for (int i = 0; i < 1000; ++i) {
    async.on_measurement({1, Time(i * 1000), Metric::kRtt, static_cast<double>(i), 0.0});
  }
  async.drain();
  EXPECT_EQ(async.forwarded(), 1000u);
  EXPECT_EQ(async.dropped(), 0u);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_TRUE(std::getline(in, line));
    ASSERT_EQ(split(line, ',')[4], std::to_string(i));
  }
}

// Blocks the consumer so the queue fills up.
class GateSink final : public EventSink {
 public:
  void on_measurement(const MeasurementRecord&) override {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return open_; });
    ++count;
  }
  void on_status(const StatusRecord&) override {}
  void open() {
    std::lock_guard lock(mu_);
    open_ = true;
    cv_.notify_all();
  }
  int count = 0;

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  bool open_ = false;
};

TEST(Log, AsyncWriterCountsDrops) {
  GateSink gate;
  AsyncLogWriter async(gate, 8);
  for (int i = 0; i < 100; ++i) async.on_measurement({});
  gate.open();
  async.drain();
  EXPECT_GT(async.dropped(), 0u);
  EXPECT_EQ(async.dropped() + async.forwarded(), 100u);
  EXPECT_EQ(static_cast<std::uint64_t>(gate.count), async.forwarded());
}

}  // namespace
}  // namespace kaprobe
