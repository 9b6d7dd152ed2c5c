#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "planout/value.hpp"

namespace planout {

std::int64_t now_ms();

struct ExposureEvent {
  std::int64_t timestamp_ms = 0;
  std::string namespace_name;
  std::string experiment;
  Value::Map inputs;
  Value::Map params;
  Value::Map overrides;
  std::string script_digest;

  friend bool operator==(const ExposureEvent&, const ExposureEvent&) = default;
};

struct CustomEvent {
  std::int64_t timestamp_ms = 0;
  std::string namespace_name;
  std::string experiment;
  Value::Map inputs;
  std::string name;
  Value::Map payload;

  friend bool operator==(const CustomEvent&, const CustomEvent&) = default;
};

using LogRecord = std::variant<ExposureEvent, CustomEvent>;

/// One line of canonical text, no trailing newline. Exposure lines carry
/// "type":"exposure", custom events "type":"event".
std::string format_record(const LogRecord& record);

/// Inverse of format_record; throws MalformedRecord.
LogRecord parse_record(std::string_view line);

// --- Sinks ------------------------------------------------------------------------

class LogSink {
 public:
  virtual ~LogSink() = default;
  /// Appends one record line. Throws SinkUnavailable when it cannot.
  virtual void write(std::string_view line) = 0;
  virtual void flush() {}
};

/// Appends to a file. When max_bytes > 0 and the file would grow past it,
/// the file is rotated to path.1 (older files shift to path.2 ... up to
/// `keep` files).
class FileSink : public LogSink {
 public:
  explicit FileSink(std::filesystem::path path, std::uintmax_t max_bytes = 0, int keep = 5);
  void write(std::string_view line) override;
  void flush() override;

 private:
  void open();
  void rotate();

  std::filesystem::path path_;
  std::uintmax_t max_bytes_;
  int keep_;
  std::uintmax_t size_ = 0;
  std::ofstream out_;
};

class StreamSink : public LogSink {
 public:
  explicit StreamSink(std::ostream& out) : out_(out) {}
  void write(std::string_view line) override;
  void flush() override { out_.flush(); }

 private:
  std::ostream& out_;
};

class MemorySink : public LogSink {
 public:
  void write(std::string_view line) override;
  std::vector<std::string> lines() const;
  /// While unavailable, write() throws SinkUnavailable.
  void set_available(bool available);

 private:
  mutable std::mutex mu_;
  std::vector<std::string> lines_;
  bool available_ = true;
};

// --- Logger -----------------------------------------------------------------------

struct ExposureLoggerOptions {
  std::size_t dedup_capacity = 100000;
  /// Records waiting for the sink beyond this many are dropped and counted.
  std::size_t buffer_limit = 100000;
  std::chrono::milliseconds retry_delay{20};
};

struct ExposureLoggerStats {
  std::uint64_t written = 0;
  std::uint64_t deduplicated = 0;
  std::uint64_t dropped = 0;
};

/// Queues records for a single consumer thread that appends them to the sink
/// in submission order. Exposures are written at most once per (namespace,
/// experiment, inputs, overrides) while the key stays in the LRU cache.
class ExposureLogger {
 public:
  explicit ExposureLogger(std::shared_ptr<LogSink> sink, ExposureLoggerOptions options = {});
  ~ExposureLogger();

  ExposureLogger(const ExposureLogger&) = delete;
  ExposureLogger& operator=(const ExposureLogger&) = delete;

  /// Returns false if the exposure was a duplicate.
  bool log_exposure(const ExposureEvent& event);
  /// Throws InvalidArgument for an empty event name.
  void log_event(const CustomEvent& event);

  /// Blocks until the queue is empty or `timeout` passes; true if drained.
  bool flush(std::chrono::milliseconds timeout = std::chrono::seconds(10));

  ExposureLoggerStats stats() const;

 private:
  bool remember(const std::string& key);
  void enqueue(std::string line);
  void run();

  std::shared_ptr<LogSink> sink_;
  ExposureLoggerOptions options_;

  std::mutex dedup_mu_;
  std::list<std::string> lru_;
  std::unordered_map<std::string, std::list<std::string>::iterator> seen_;

  mutable std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable drained_;
  std::deque<std::string> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  ExposureLoggerStats stats_;
  std::thread worker_;
};

}  // namespace planout
