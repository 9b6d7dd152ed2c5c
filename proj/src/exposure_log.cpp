#include "planout/exposure_log.hpp"

#include <nlohmann/json.hpp>

#include "planout/error.hpp"

namespace planout {

using nlohmann::json;

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

namespace {

json map_json(const Value::Map& m) { return to_json(Value(m)); }

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::MalformedRecord, "malformed log record: " + why);
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) malformed(std::string("field '") + key + "' is not a string");
  return v.get<std::string>();
}

Value::Map map_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_object()) malformed(std::string("field '") + key + "' is not an object");
  return from_json(v).as_map();
}

std::int64_t int_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) malformed(std::string("field '") + key + "' is not an integer");
  return v.get<std::int64_t>();
}

void expect_fields(const json& j, std::size_t n) {
  if (j.size() != n) malformed("unexpected fields");
}

}  // namespace

std::string format_record(const LogRecord& record) {
  json j;
  if (const auto* e = std::get_if<ExposureEvent>(&record)) {
    j = {{"type", "exposure"},         {"timestamp", e->timestamp_ms},
         {"namespace", e->namespace_name}, {"experiment", e->experiment},
         {"inputs", map_json(e->inputs)},  {"params", map_json(e->params)},
         {"overrides", map_json(e->overrides)}, {"digest", e->script_digest}};
  } else {
    const auto& c = std::get<CustomEvent>(record);
    j = {{"type", "event"},           {"timestamp", c.timestamp_ms},
         {"namespace", c.namespace_name}, {"experiment", c.experiment},
         {"inputs", map_json(c.inputs)},  {"event", c.name},
         {"payload", map_json(c.payload)}};
  }
  return j.dump();
}

LogRecord parse_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    malformed(e.what());
  }
  if (!j.is_object()) malformed("not an object");
  std::string type = string_field(j, "type");
  try {
    if (type == "exposure") {
      expect_fields(j, 8);
      ExposureEvent e;
      e.timestamp_ms = int_field(j, "timestamp");
      e.namespace_name = string_field(j, "namespace");
      e.experiment = string_field(j, "experiment");
      e.inputs = map_field(j, "inputs");
      e.params = map_field(j, "params");
      e.overrides = map_field(j, "overrides");
      e.script_digest = string_field(j, "digest");
      return e;
    }
    if (type == "event") {
      expect_fields(j, 7);
      CustomEvent c;
      c.timestamp_ms = int_field(j, "timestamp");
      c.namespace_name = string_field(j, "namespace");
      c.experiment = string_field(j, "experiment");
      c.inputs = map_field(j, "inputs");
      c.name = string_field(j, "event");
      c.payload = map_field(j, "payload");
      if (c.name.empty()) malformed("empty event name");
      return c;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedRecord) throw;
    malformed(e.what());
  }
  malformed("unknown record type '" + type + "'");
}

// --- Sinks ------------------------------------------------------------------------

FileSink::FileSink(std::filesystem::path path, std::uintmax_t max_bytes, int keep)
    : path_(std::move(path)), max_bytes_(max_bytes), keep_(std::max(keep, 1)) {
  open();
}

void FileSink::open() {
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw Error(ErrorCode::SinkUnavailable, "cannot open log file " + path_.string());
  std::error_code ec;
  size_ = std::filesystem::exists(path_, ec) ? std::filesystem::file_size(path_, ec) : 0;
}

void FileSink::rotate() {
  out_.close();
  std::error_code ec;
  auto numbered = [&](int i) { return std::filesystem::path(path_.string() + "." + std::to_string(i)); };
  std::filesystem::remove(numbered(keep_), ec);
  for (int i = keep_ - 1; i >= 1; --i) {
    if (std::filesystem::exists(numbered(i), ec)) std::filesystem::rename(numbered(i), numbered(i + 1), ec);
  }
  std::filesystem::rename(path_, numbered(1), ec);
  open();
}

void FileSink::write(std::string_view line) {
  if (max_bytes_ > 0 && size_ > 0 && size_ + line.size() + 1 > max_bytes_) rotate();
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.put('\n');
  if (!out_) {
    out_.clear();
    throw Error(ErrorCode::SinkUnavailable, "write to " + path_.string() + " failed");
  }
  size_ += line.size() + 1;
}

void FileSink::flush() { out_.flush(); }

void StreamSink::write(std::string_view line) {
  out_ << line << '\n';
  if (!out_) throw Error(ErrorCode::SinkUnavailable, "log stream is not writable");
}

void MemorySink::write(std::string_view line) {
  std::lock_guard lock(mu_);
  if (!available_) throw Error(ErrorCode::SinkUnavailable, "memory sink disabled");
  lines_.emplace_back(line);
}

std::vector<std::string> MemorySink::lines() const {
  std::lock_guard lock(mu_);
  return lines_;
}

void MemorySink::set_available(bool available) {
  std::lock_guard lock(mu_);
  available_ = available;
}

// --- Logger -----------------------------------------------------------------------

ExposureLogger::ExposureLogger(std::shared_ptr<LogSink> sink, ExposureLoggerOptions options)
    : sink_(std::move(sink)), options_(options) {
  if (!sink_) throw Error(ErrorCode::InvalidArgument, "exposure logger needs a sink");
  worker_ = std::thread([this] { run(); });
}

ExposureLogger::~ExposureLogger() {
  flush(std::chrono::seconds(2));
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  wake_.notify_all();
  worker_.join();
}

bool ExposureLogger::remember(const std::string& key) {
  std::lock_guard lock(dedup_mu_);
  auto it = seen_.find(key);
  if (it != seen_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    return false;
  }
  lru_.push_front(key);
  seen_.emplace(key, lru_.begin());
  if (seen_.size() > options_.dedup_capacity) {
    seen_.erase(lru_.back());
    lru_.pop_back();
  }
  return true;
}

bool ExposureLogger::log_exposure(const ExposureEvent& event) {
  std::string key = event.namespace_name;
  key += '\x1f';
  key += event.experiment;
  key += '\x1f';
  key += canonical_text(event.inputs);
  key += '\x1f';
  key += canonical_text(event.overrides);
  if (!remember(key)) {
    std::lock_guard lock(mu_);
    ++stats_.deduplicated;
    return false;
  }
  enqueue(format_record(event));
  return true;
}

void ExposureLogger::log_event(const CustomEvent& event) {
  if (event.name.empty()) throw Error(ErrorCode::InvalidArgument, "event name must not be empty");
  enqueue(format_record(event));
}

void ExposureLogger::enqueue(std::string line) {
  {
    std::lock_guard lock(mu_);
    if (queue_.size() >= options_.buffer_limit) {
      ++stats_.dropped;
      return;
    }
    queue_.push_back(std::move(line));
  }
  wake_.notify_one();
}

void ExposureLogger::run() {
  std::unique_lock lock(mu_);
  for (;;) {
    wake_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
    if (queue_.empty()) return;  // stopping
    busy_ = true;
    std::string line = std::move(queue_.front());
    queue_.pop_front();
    lock.unlock();
    bool ok = true;
    try {
      sink_->write(line);
    } catch (const Error&) {
      ok = false;
    }
    lock.lock();
    if (ok) {
      ++stats_.written;
      if (queue_.empty()) {
        lock.unlock();
        sink_->flush();
        lock.lock();
      }
      busy_ = false;
      if (queue_.empty()) drained_.notify_all();
      continue;
    }
    busy_ = false;
    // Sink unavailable: put the record back and retry after a pause.
    if (stopping_) {
      stats_.dropped += 1 + queue_.size();
      queue_.clear();
      drained_.notify_all();
      return;
    }
    queue_.push_front(std::move(line));
    wake_.wait_for(lock, options_.retry_delay, [&] { return stopping_; });
  }
}

bool ExposureLogger::flush(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return drained_.wait_for(lock, timeout, [&] { return queue_.empty() && !busy_; });
}

ExposureLoggerStats ExposureLogger::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

}  // namespace planout
