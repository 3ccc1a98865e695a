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

#include "kaprobe/log.hpp"

#include <cstdio>

#include "kaprobe/errors.hpp"

namespace kaprobe {

LogFormat parse_log_format(std::string_view text) {
  if (text == "csv") return LogFormat::kCsv;
  if (text == "jsonl") return LogFormat::kJsonl;
  throw ConfigError("log format must be csv or jsonl, got '" + std::string(text) + "'");
}

const char* log_format_name(LogFormat format) {
  return format == LogFormat::kCsv ? "csv" : "jsonl";
}

namespace {

std::string time_ms(Time t) {
  const auto us = t.count();
  char buf[48];
  const char* sign = us < 0 ? "-" : "";
  const long long a = us < 0 ? -us : us;
  std::snprintf(buf, sizeof buf, "%s%lld.%03lld", sign, a / 1000, a % 1000);
  return buf;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string csv_header() {
  std::string line;
  for (auto f : kLogFields) {
    if (!line.empty()) line += ',';
    line += f;
  }
  return line;
}

std::string format_csv(const MeasurementRecord& r) {
  return time_ms(r.time) + ',' + std::to_string(r.session) + ",measurement," +
         metric_name(r.metric) + ',' + number(r.raw) + ',' + number(r.ewma) + ",,";
}

std::string format_csv(const StatusRecord& r) {
  return time_ms(r.time) + ',' + std::to_string(r.session) + ",status,,,," +
         link_status_name(r.to) + ',' + link_status_name(r.from);
}

std::string format_jsonl(const MeasurementRecord& r) {
  return "{\"time_ms\":" + time_ms(r.time) + ",\"session\":" + std::to_string(r.session) +
         ",\"event\":\"measurement\",\"metric\":\"" + metric_name(r.metric) +
         "\",\"raw\":" + number(r.raw) + ",\"ewma\":" + number(r.ewma) +
         ",\"status\":null,\"prev_status\":null}";
}

std::string format_jsonl(const StatusRecord& r) {
  return "{\"time_ms\":" + time_ms(r.time) + ",\"session\":" + std::to_string(r.session) +
         ",\"event\":\"status\",\"metric\":null,\"raw\":null,\"ewma\":null,\"status\":\"" +
         link_status_name(r.to) + "\",\"prev_status\":\"" + link_status_name(r.from) + "\"}";
}

LogWriter::LogWriter(std::ostream& out, LogFormat format) : out_(out), format_(format) {
  if (format_ == LogFormat::kCsv) out_ << csv_header() << '\n';
}

void LogWriter::write(const std::string& line) {
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  ++records_;
}

void LogWriter::on_measurement(const MeasurementRecord& record) {
  write(format_ == LogFormat::kCsv ? format_csv(record) : format_jsonl(record));
}

void LogWriter::on_status(const StatusRecord& record) {
  write(format_ == LogFormat::kCsv ? format_csv(record) : format_jsonl(record));
}

void LogWriter::flush() {
  std::lock_guard lock(mu_);
  out_.flush();
}

std::uint64_t LogWriter::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

AsyncLogWriter::AsyncLogWriter(EventSink& target, std::size_t capacity)
    : target_(target), capacity_(capacity == 0 ? 1 : capacity) {
  worker_ = std::thread([this] { run(); });
}

AsyncLogWriter::~AsyncLogWriter() { stop(); }

void AsyncLogWriter::push(Item item) {
  {
    std::lock_guard lock(mu_);
    if (stopping_ || queue_.size() >= capacity_) {
      ++dropped_;
      return;
    }
    queue_.push_back(std::move(item));
  }
  ready_.notify_one();
}

void AsyncLogWriter::on_measurement(const MeasurementRecord& record) { push(record); }
void AsyncLogWriter::on_status(const StatusRecord& record) { push(record); }

void AsyncLogWriter::run() {
  std::unique_lock lock(mu_);
  for (;;) {
    ready_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) break;
    Item item = std::move(queue_.front());
    queue_.pop_front();
    busy_ = true;
    lock.unlock();
    std::visit(
        [this](const auto& r) {
          if constexpr (std::is_same_v<std::decay_t<decltype(r)>, MeasurementRecord>) {
            target_.on_measurement(r);
          } else {
            target_.on_status(r);
          }
        },
        item);
    lock.lock();
    busy_ = false;
    ++forwarded_;
    if (queue_.empty()) idle_.notify_all();
  }
  idle_.notify_all();
}

void AsyncLogWriter::drain() {
  std::unique_lock lock(mu_);
  idle_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

void AsyncLogWriter::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_ && !worker_.joinable()) return;
    stopping_ = true;
  }
  ready_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::uint64_t AsyncLogWriter::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::uint64_t AsyncLogWriter::forwarded() const {
  std::lock_guard lock(mu_);
  return forwarded_;
}

}  // namespace kaprobe
