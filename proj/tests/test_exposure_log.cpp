#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "planout/error.hpp"
#include "planout/exposure_log.hpp"
#include "test_support.hpp"

using namespace planout;
using namespace planout::testing;

namespace {

ExposureEvent exposure(std::int64_t unit, const std::string& exp = "exp1") {
  ExposureEvent e;
  e.timestamp_ms = 1700000000000;
  e.namespace_name = "ns";
  e.experiment = exp;
  e.inputs = {{"userid", unit}};
  e.params = {{"has_banner", 1}, {"button_text", "I'm voting"}};
  e.script_digest = std::string(40, 'a');
  return e;
}

}  // namespace

TEST_CASE("records round trip through their line format") {
  ExposureEvent e = exposure(7);
  e.overrides = {{"has_banner", 0}};
  e.params["ratio"] = 2.0;
  auto line = format_record(e);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.find(R"("type":"exposure")") != std::string::npos);
  CHECK(std::get<ExposureEvent>(parse_record(line)) == e);

  CustomEvent c;
  c.timestamp_ms = 5;
  c.namespace_name = "ns";
  c.experiment = "exp1";
  c.inputs = {{"userid", 7}};
  c.name = "signup";
  c.payload = {{"value", 1.5}, {"note", "line\nbreak"}};
  CHECK(std::get<CustomEvent>(parse_record(format_record(c))) == c);
}

TEST_CASE("parse_record rejects malformed lines") {
  for (const char* bad : {"", "{", "[]", R"({"type":"other"})", R"({"type":"exposure"})",
                          R"({"type":"event","timestamp":1,"namespace":"n","experiment":"e","inputs":{},"event":"","payload":{}})",
                          R"({"type":"event","timestamp":"1","namespace":"n","experiment":"e","inputs":{},"event":"x","payload":{}})"}) {
    CAPTURE(bad);
    try {
      parse_record(bad);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedRecord);
    }
  }
}

TEST_CASE("fuzzed records all parse back") {
  std::mt19937 rng(99);
  IrGenerator gen(5);
  for (int i = 0; i < 300; ++i) {
    ExposureEvent e = exposure(static_cast<std::int64_t>(rng() % 1000));
    // Literal values from the generator cover strings with quotes, escapes and
    // extreme numbers.
    auto lit = gen.expr(3);
    if (lit.kind == ExprKind::Literal) e.params["v"] = lit.literal;
    e.inputs["s"] = std::string(1, static_cast<char>(1 + rng() % 126));
    auto back = parse_record(format_record(e));
    CHECK(std::get<ExposureEvent>(back) == e);
  }
}

TEST_CASE("logger deduplicates exposures but never events") {
  auto sink = std::make_shared<MemorySink>();
  {
    ExposureLogger logger(sink);
    CHECK(logger.log_exposure(exposure(1)));
    CHECK_FALSE(logger.log_exposure(exposure(1)));
    CHECK(logger.log_exposure(exposure(1, "exp2")));
    CustomEvent c;
    c.namespace_name = "ns";
    c.experiment = "exp1";
    c.name = "conversion";
    for (int i = 0; i < 1000; ++i) logger.log_event(c);
    c.name.clear();
    CHECK_THROWS_AS(logger.log_event(c), Error);
    CHECK(logger.flush());
    auto stats = logger.stats();
    CHECK(stats.written == 1002);
    CHECK(stats.deduplicated == 1);
  }
  auto lines = sink->lines();
  REQUIRE(lines.size() == 1002);
  CHECK(std::holds_alternative<ExposureEvent>(parse_record(lines[0])));
  CHECK(std::holds_alternative<CustomEvent>(parse_record(lines[2])));
}

TEST_CASE("dedup cache is bounded") {
  auto sink = std::make_shared<MemorySink>();
  ExposureLoggerOptions opts;
  opts.dedup_capacity = 2;
  ExposureLogger logger(sink, opts);
  CHECK(logger.log_exposure(exposure(1)));
  CHECK(logger.log_exposure(exposure(2)));
  CHECK(logger.log_exposure(exposure(3)));  // evicts 1
  CHECK(logger.log_exposure(exposure(1)));
  CHECK_FALSE(logger.log_exposure(exposure(3)));
}

TEST_CASE("unavailable sink buffers up to the bound, then drops") {
  auto sink = std::make_shared<MemorySink>();
  sink->set_available(false);
  ExposureLoggerOptions opts;
  opts.buffer_limit = 10;
  opts.retry_delay = std::chrono::milliseconds(5);
  ExposureLogger logger(sink, opts);
  for (int i = 0; i < 25; ++i) logger.log_exposure(exposure(i));
  CHECK_FALSE(logger.flush(std::chrono::milliseconds(50)));
  auto dropped = logger.stats().dropped;
  CHECK(dropped >= 14);
  CHECK(dropped <= 15);
  sink->set_available(true);
  CHECK(logger.flush());
  CHECK(sink->lines().size() + dropped == 25);
}

TEST_CASE("file sink appends and rotates by size") {
  auto dir = std::filesystem::temp_directory_path() / ("planout_log_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  auto path = dir / "exposures.log";
  {
    auto sink = std::make_shared<FileSink>(path, 2000, 3);
    ExposureLogger logger(sink);
    for (int i = 0; i < 100; ++i) logger.log_exposure(exposure(i));
    CHECK(logger.flush());
  }
  std::size_t total = 0;
  std::set<std::int64_t> units;
  for (const auto& p : {path, std::filesystem::path(path.string() + ".1")}) {
    REQUIRE(std::filesystem::exists(p));
    CHECK(std::filesystem::file_size(p) <= 2000);
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
      ++total;
      units.insert(std::get<ExposureEvent>(parse_record(line)).inputs.at("userid").as_int());
    }
  }
  CHECK(total > 0);
  CHECK(total == units.size());
  CHECK_FALSE(std::filesystem::exists(path.string() + ".4"));
  std::filesystem::remove_all(dir);
}
