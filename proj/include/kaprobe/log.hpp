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

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <variant>

#include "kaprobe/events.hpp"

namespace kaprobe {

enum class LogFormat : std::uint8_t { kCsv, kJsonl };

// "csv" or "jsonl". Throws ConfigError.
LogFormat parse_log_format(std::string_view text);
const char* log_format_name(LogFormat format);

// Field names in output order; both renderings use exactly these.
inline constexpr std::string_view kLogFields[] = {
    "time_ms", "session", "event", "metric", "raw", "ewma", "status", "prev_status"};

std::string csv_header();
std::string format_csv(const MeasurementRecord& record);
std::string format_csv(const StatusRecord& record);
std::string format_jsonl(const MeasurementRecord& record);
std::string format_jsonl(const StatusRecord& record);

// Writes one line per record to a stream. Thread-safe; the CSV header is
// written on construction.
class LogWriter final : public EventSink {
 public:
  LogWriter(std::ostream& out, LogFormat format);
  void on_measurement(const MeasurementRecord& record) override;
  void on_status(const StatusRecord& record) override;
  void flush();
  std::uint64_t records() const;

 private:
  void write(const std::string& line);

  std::ostream& out_;
  LogFormat format_;
  mutable std::mutex mu_;
  std::uint64_t records_ = 0;
};

// Hands records to a background thread through a bounded queue. A full queue
// drops the record and counts it.
class AsyncLogWriter final : public EventSink {
 public:
  AsyncLogWriter(EventSink& target, std::size_t capacity = 65536);
  ~AsyncLogWriter() override;
  AsyncLogWriter(const AsyncLogWriter&) = delete;
  AsyncLogWriter& operator=(const AsyncLogWriter&) = delete;

  void on_measurement(const MeasurementRecord& record) override;
  void on_status(const StatusRecord& record) override;
  // Blocks until every queued record reached the target.
  void drain();
  void stop();
  std::uint64_t dropped() const;
  std::uint64_t forwarded() const;

 private:
  using Item = std::variant<MeasurementRecord, StatusRecord>;
  void push(Item item);
  void run();

  EventSink& target_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable ready_;
  std::condition_variable idle_;
  std::deque<Item> queue_;
  bool stopping_ = false;
  bool busy_ = false;
  std::uint64_t dropped_ = 0;
  std::uint64_t forwarded_ = 0;
  std::thread worker_;
};

}  // namespace kaprobe
