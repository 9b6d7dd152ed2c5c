#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "planout/cli.hpp"
#include "test_support.hpp"

using namespace planout;
using namespace planout::testing;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "planout");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch() {
  auto dir = std::filesystem::temp_directory_path() / ("planout_cli_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("run prints a deterministic assignment") {
  auto r = cli({"run", corpus_path("voter_turnout"), "--input", "userid=7"});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK((j["params"]["has_banner"] == 0 || j["params"]["has_banner"] == 1));
  CHECK(r.out == cli({"run", corpus_path("voter_turnout"), "--input", "userid=7"}).out);
  // Parameters stay in assignment order.
  CHECK(r.out.find("has_banner") < r.out.find("button_text"));

  auto frozen = cli({"run", corpus_path("voter_turnout"), "-i", "userid=7", "-o", "has_banner=0"});
  CHECK(json::parse(frozen.out)["params"]["has_banner"] == 0);

  auto social = cli({"run", corpus_path("social_cues"), "-i", "userid=3", "-i", "pageid=9", "--input-json",
                     R"(liking_friends=["a","b","c","d"])"});
  REQUIRE(social.code == 0);
  CHECK(json::parse(social.out)["params"]["friends_shown"].is_array());
}

TEST_CASE("compile then run on the IR equals run on the source") {
  auto dir = scratch();
  for (const auto& name : corpus_names()) {
    auto compiled = cli({"compile", corpus_path(name)});
    REQUIRE(compiled.code == 0);
    auto ir_path = (dir / (name + ".json")).string();
    std::ofstream(ir_path) << compiled.out;
    std::vector<std::string> in = {"-i", "userid=11", "-i", "cookieid=11", "-i", "viewerid=11", "-i", "storyid=4",
                                   "-i", "sourceid=2", "-i", "pageid=1", "-i", "country=US",
                                   "--input-json", R"(liking_friends=["x","y"])"};
    auto a = in, b = in;
    a.insert(a.begin(), {"run", corpus_path(name)});
    b.insert(b.begin(), {"run", ir_path});
    auto ra = cli(a), rb = cli(b);
    CAPTURE(name);
    CHECK(ra.code == 0);
    CHECK(ra.out == rb.out);

    auto back = cli({"decompile", ir_path});
    CHECK(back.code == 0);
    CHECK(parse_or_throw(back.out) == corpus_ir(name));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("errors and exit codes") {
  auto dir = scratch();
  auto bad = (dir / "bad.planout").string();
  std::ofstream(bad) << "x = ;";
  auto r = cli({"compile", bad});
  CHECK(r.code == 1);
  CHECK(r.err.find("offset 4") != std::string::npos);
  CHECK(r.err.find("1:5") != std::string::npos);

  auto unit = (dir / "unit.planout").string();
  std::ofstream(unit) << "y = uniformChoice(choices=[1,2]);";
  CHECK(cli({"compile", unit}).code == 1);

  CHECK(cli({"run", corpus_path("voter_turnout")}).code == 1);  // missing userid
  CHECK(cli({"run", (dir / "missing.planout").string()}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"ns", "list"}).code == 1);  // no store
  std::filesystem::remove_all(dir);
}

TEST_CASE("simulate renders the six-cell table") {
  auto r = cli({"simulate", corpus_path("signup_factorial"), "--n", "60000", "--pairs", "button_color,button_text"});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["n"] == 60000);
  CHECK(j["joint"][0]["cells"].size() == 6);
  auto t = cli({"simulate", corpus_path("signup_factorial"), "--n", "600", "--format", "table", "--jobs", "2"});
  CHECK(t.out.find("button_color x button_text") != std::string::npos);
  auto grid = cli({"simulate", corpus_path("comment_collapse"), "--grid", "viewerid:20", "--grid", "storyid:30"});
  CHECK(json::parse(grid.out)["n"] == 600);
}

TEST_CASE("sweep prints one line per unit") {
  auto r = cli({"run", corpus_path("button_color"), "--sweep", "cookieid:5"});
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);
}

TEST_CASE("namespace administration through a store file and config") {
  auto dir = scratch();
  auto store = (dir / "store.log").string();
  auto config = (dir / "planout.toml").string();
  std::ofstream(config) << "store=" << store << "\n";
  CHECK(cli({"--config", config, "ns", "create", "vote2012", "--unit", "userid", "--segments", "100", "--default",
             "has_banner=0"}).code == 0);
  CHECK(cli({"--config", config, "ns", "create", "vote2012", "--unit", "userid"}).code == 1);
  auto alloc = cli({"--config", config, "ns", "alloc", "vote2012", "turnout", corpus_path("voter_turnout"), "--segments",
                    "40"});
  REQUIRE(alloc.code == 0);
  CHECK(json::parse(alloc.out)["segments"] == 40);
  auto map = json::parse(cli({"--store", store, "ns", "map", "vote2012"}).out);
  CHECK(map["allocation"]["turnout"] == 40);
  CHECK(map["allocation"]["<unallocated>"] == 60);

  auto a = json::parse(cli({"--store", store, "ns", "assign", "vote2012", "7", "--freeze", "has_feed_stories:1"}).out);
  if (!a["experiment"].is_null()) CHECK(a["params"]["has_feed_stories"] == 1);
  CHECK(cli({"--store", store, "ns", "assign", "vote2012", "7", "--freeze", "bad"}).code == 1);

  CHECK(cli({"--store", store, "ns", "defaults", "vote2012", "button_text=Vote"}).code == 0);
  CHECK(json::parse(cli({"--store", store, "ns", "defaults", "vote2012"}).out)["button_text"] == "Vote");
  auto d = json::parse(cli({"--store", store, "ns", "dealloc", "vote2012", "turnout"}).out);
  CHECK(d["prior_status"] == "active");
  CHECK(json::parse(cli({"--store", store, "ns", "list"}).out)["namespaces"][0]["free_segments"] == 100);
  std::filesystem::remove_all(dir);
}
