#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "planout/error.hpp"
#include "planout/random_ops.hpp"

using namespace planout;

namespace {

// Expected digests below were computed with Python's hashlib, independently of
// this library, e.g. int(sha1(b"ns.exp.button_color.42").hexdigest()[:15], 16).
constexpr std::uint64_t kButtonColor42 = 466459311706049706ULL;
constexpr std::uint64_t kButtonColor4 = 928288206297540337ULL;
constexpr std::uint64_t kUserSignup42 = 630928711242076272ULL;
constexpr std::uint64_t kTuple12 = 89188422161758876ULL;

std::vector<Value> units(std::initializer_list<Value> u) { return std::vector<Value>(u); }

}  // namespace

TEST_CASE("sha1_hex matches a known digest") {
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
}

TEST_CASE("hash_draw takes the first 15 hex digits of SHA-1 over the salted unit") {
  SaltContext ctx("ns", "exp", "button_color");
  auto u = units({42});
  CHECK(hash_input(ctx, u) == "ns.exp.button_color.42");
  auto draw = hash_draw(ctx, u);
  CHECK(draw.integer == kButtonColor42);
  CHECK(draw.unit_float == doctest::Approx(0.40458895930223376).epsilon(1e-15));

  SaltContext signup("user_signup", "my_exp", "button_color");
  CHECK(hash_draw(signup, u).integer == kUserSignup42);

  SaltContext p("ns", "exp", "p");
  auto tuple = units({1, 2});
  CHECK(hash_input(p, tuple) == "ns.exp.p.1.2");
  CHECK(hash_draw(p, tuple).integer == kTuple12);
}

TEST_CASE("hash_draw is deterministic and canonicalizes unit stringification") {
  SaltContext ctx("ns", "exp", "button_color");
  auto a = hash_draw(ctx, units({4}));
  CHECK(a == hash_draw(ctx, units({4})));
  CHECK(a == hash_draw(ctx, units({"4"})));
  CHECK(a == hash_draw(ctx, units({4.0})));
  CHECK(a.integer == kButtonColor4);
  CHECK(hash_draw(ctx, units({true})) == hash_draw(ctx, units({1})));
}

TEST_CASE("hash_draw rejects missing or ambiguous units") {
  SaltContext ctx("ns", "exp", "x");
  CHECK_THROWS_AS(hash_draw(ctx, std::vector<Value>{}), Error);
  try {
    hash_draw(ctx, units({Value()}));
    FAIL("expected EmptyUnit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyUnit);
  }
  try {
    hash_draw(ctx, units({"a.b"}));
    FAIL("expected InvalidUnit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidUnit);
  }
  CHECK_THROWS_AS(hash_draw(ctx, units({Value(Value::List{1})})), Error);
}

TEST_CASE("salt components may not contain dots") {
  CHECK_THROWS_AS(SaltContext("a.b", "exp"), Error);
  CHECK_THROWS_AS(SaltContext("ns", ""), Error);
  CHECK_THROWS_AS(SaltContext("ns", "exp", "p.q"), Error);
  CHECK(SaltContext("ns", "exp", "p").full_salt() == "ns.exp.p");
}

TEST_CASE("uniform_choice picks choices[integer mod n]") {
  SaltContext ctx("ns", "exp", "button_color");
  Value::List colors{"#3c539a", "#5f9647", "#b33316"};
  // kButtonColor42 % 3 == 0
  CHECK(uniform_choice(colors, ctx, units({42})) == Value("#3c539a"));
  CHECK(uniform_choice(colors, ctx, units({4})) == Value("#5f9647"));
  CHECK(uniform_choice(Value::List{"only"}, ctx, units({99})) == Value("only"));
  CHECK_THROWS_AS(uniform_choice(Value::List{}, ctx, units({1})), Error);
}

TEST_CASE("uniform_choice over 60k units gives equal thirds") {
  SaltContext ctx("ns", "exp", "button_color");
  Value::List colors{"a", "b", "c"};
  std::map<std::string, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) counts[uniform_choice(colors, ctx, units({i})).as_string()]++;
  REQUIRE(counts.size() == 3);
  for (const auto& [color, count] : counts) CHECK(std::abs(count / double(n) - 1.0 / 3) < 0.01);
}

TEST_CASE("weighted_choice walks cumulative weights") {
  SaltContext ctx("ns", "exp", "button_text");
  Value::List text{"Sign up", "Join now"};
  // unit_float for unit 42 is 0.90998..., past the 0.8 boundary.
  CHECK(weighted_choice(text, {0.8, 0.2}, ctx, units({42})) == Value("Join now"));
  for (int i = 0; i < 200; ++i) {
    CHECK(weighted_choice(text, {1.0, 0.0}, ctx, units({i})) == Value("Sign up"));
    CHECK(weighted_choice(text, {0.0, 3.0}, ctx, units({i})) == Value("Join now"));
  }
  CHECK_THROWS_AS(weighted_choice(text, {1.0}, ctx, units({1})), Error);
  try {
    weighted_choice(text, {0.0, 0.0}, ctx, units({1}));
    FAIL("expected ZeroTotalWeight");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroTotalWeight);
  }
}

TEST_CASE("weighted_choice frequencies follow the weights") {
  SaltContext ctx("ns", "exp", "button_text");
  Value::List text{"Sign up", "Join now"};
  const int n = 60000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += weighted_choice(text, {0.8, 0.2}, ctx, units({i})) == Value("Sign up");
  CHECK(std::abs(first / double(n) - 0.8) < 0.01);

  // Equal weights match uniform_choice in distribution.
  const int m = 100000;
  int weighted_a = 0;
  int uniform_a = 0;
  for (int i = 0; i < m; ++i) {
    weighted_a += weighted_choice(Value::List{"a", "b"}, {2.0, 2.0}, ctx, units({i})) == Value("a");
    uniform_a += uniform_choice(Value::List{"a", "b"}, ctx, units({i})) == Value("a");
  }
  CHECK(std::abs(weighted_a / double(m) - uniform_a / double(m)) < 0.01);
}

TEST_CASE("bernoulli_trial uses a strict threshold") {
  SaltContext ctx("ns", "exp", "flag");
  // unit_float for units 1..5: 0.272, 0.980, 0.985, 0.232, 0.020 (hashlib oracle)
  std::vector<std::int64_t> expected{1, 0, 0, 1, 1};
  for (int u = 1; u <= 5; ++u) CHECK(bernoulli_trial(0.5, ctx, units({u})) == expected[u - 1]);
  for (int u = 0; u < 1000; ++u) {
    CHECK(bernoulli_trial(0.0, ctx, units({u})) == 0);
    CHECK(bernoulli_trial(1.0, ctx, units({u})) == 1);
  }
  CHECK_THROWS_AS(bernoulli_trial(1.5, ctx, units({1})), Error);
  CHECK_THROWS_AS(bernoulli_trial(-0.1, ctx, units({1})), Error);
}

TEST_CASE("bernoulli_trial is monotone in p") {
  SaltContext ctx("ns", "exp", "flag");
  for (int u = 0; u < 2000; ++u) {
    if (bernoulli_trial(0.3, ctx, units({u})) == 1) CHECK(bernoulli_trial(0.6, ctx, units({u})) == 1);
  }
}

TEST_CASE("bernoulli_trial over viewer x story pairs hits p") {
  SaltContext ctx("ns", "exp", "collapse_story");
  int hits = 0;
  int n = 0;
  for (int v = 0; v < 400; ++v) {
    for (int s = 0; s < 500; ++s, ++n) hits += static_cast<int>(bernoulli_trial(0.05, ctx, units({v, s})));
  }
  CHECK(std::abs(hits / double(n) - 0.05) < 0.005);
}

TEST_CASE("random_integer is inclusive on both ends") {
  SaltContext ctx("ns", "exp", "num");
  CHECK(random_integer(1, 3, ctx, units({42})) == 3);  // 1 + integer % 3 (hashlib oracle)
  CHECK(random_integer(7, 7, ctx, units({1})) == 7);
  std::map<std::int64_t, int> counts;
  const int n = 90000;
  for (int i = 0; i < n; ++i) counts[random_integer(1, 3, ctx, units({i}))]++;
  REQUIRE(counts.size() == 3);
  for (const auto& [v, c] : counts) CHECK(std::abs(c / double(n) - 1.0 / 3) < 0.01);
  CHECK_THROWS_AS(random_integer(3, 1, ctx, units({1})), Error);
  // Full 64-bit range does not overflow.
  auto big = random_integer(std::numeric_limits<std::int64_t>::min(),
                            std::numeric_limits<std::int64_t>::max(), ctx, units({5}));
  (void)big;
}

TEST_CASE("random_float maps the unit interval onto [min, max]") {
  SaltContext ctx("ns", "exp", "x");
  CHECK(random_float(0.0, 1.0, ctx, units({42})) == doctest::Approx(0.565473477263952).epsilon(1e-12));
  CHECK(random_float(0.3, 0.3, ctx, units({9})) == 0.3);
  CHECK_THROWS_AS(random_float(1.0, 0.0, ctx, units({1})), Error);

  const int n = 100000;
  double sum = 0;
  double sumsq = 0;
  for (int i = 0; i < n; ++i) {
    double v = random_float(0.0, 1.0, ctx, units({i}));
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
    sum += v;
    sumsq += v * v;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 0.005);
  CHECK(std::abs(var - 1.0 / 12) < 0.005);
  for (int i = 0; i < 1000; ++i) {
    double v = random_float(-2.5, 4.0, ctx, units({i}));
    CHECK(v >= -2.5);
    CHECK(v <= 4.0);
  }
}

TEST_CASE("sample matches the Fisher-Yates reference") {
  SaltContext ctx("ns", "exp", "friends");
  // Reference shuffles computed with a standalone Python implementation.
  CHECK(sample(Value::List{"a", "b", "c", "d", "e"}, 3, ctx, units({7, 3})) ==
        Value::List{"a", "d", "e"});
  CHECK(sample(Value::List{10, 20, 30, 40}, 4, ctx, units({"u1"})) == Value::List{20, 40, 10, 30});
  CHECK(sample(Value::List{1, 2}, 0, ctx, units({1})).empty());
  CHECK_THROWS_AS(sample(Value::List{1, 2}, 3, ctx, units({1})), Error);
  CHECK_THROWS_AS(sample(Value::List{1, 2}, -1, ctx, units({1})), Error);
}

TEST_CASE("sample output is a sub-multiset without reused indices") {
  SaltContext ctx("ns", "exp", "friends");
  Value::List choices{1, 1, 2, 3, 5, 8};
  for (int u = 0; u < 500; ++u) {
    auto draws = u % 7;
    auto out = sample(choices, draws, ctx, units({u}));
    REQUIRE(out.size() == static_cast<std::size_t>(draws));
    std::map<std::int64_t, int> pool;
    for (const auto& c : choices) pool[c.as_int()]++;
    for (const auto& v : out) CHECK(--pool[v.as_int()] >= 0);
  }
}

TEST_CASE("sample pairs are uniform") {
  // Oracle: enumerate the three unordered pairs of {a,b,c}; each has mass 1/3.
  SaltContext ctx("ns", "exp", "pair");
  std::map<std::set<std::string>, int> counts;
  const int n = 90000;
  for (int u = 0; u < n; ++u) {
    auto out = sample(Value::List{"a", "b", "c"}, 2, ctx, units({u}));
    counts[{out[0].as_string(), out[1].as_string()}]++;
  }
  REQUIRE(counts.size() == 3);
  for (const auto& [pair, c] : counts) CHECK(std::abs(c / double(n) - 1.0 / 3) < 0.01);
}

TEST_CASE("different salts give independent draws") {
  SaltContext a("ns", "exp", "a");
  SaltContext b("ns", "exp", "b");
  const int n = 100000;
  int joint[2][2] = {{0, 0}, {0, 0}};
  for (int u = 0; u < n; ++u) {
    joint[bernoulli_trial(0.5, a, units({u}))][bernoulli_trial(0.5, b, units({u}))]++;
  }
  double pa1 = (joint[1][0] + joint[1][1]) / double(n);
  double pb1 = (joint[0][1] + joint[1][1]) / double(n);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      double pa = i ? pa1 : 1 - pa1;
      double pb = j ? pb1 : 1 - pb1;
      CHECK(std::abs(joint[i][j] / double(n) - pa * pb) < 0.01);
    }
  }
}

TEST_CASE("changing any tuple element re-randomizes") {
  SaltContext ctx("ns", "exp", "flag");
  int ones = 0;
  const int n = 100000;
  for (int s = 0; s < n; ++s) ones += static_cast<int>(bernoulli_trial(0.5, ctx, units({"fixed_user", s})));
  CHECK(std::abs(ones / double(n) - 0.5) < 0.01);
}

TEST_CASE("plug-in random operators are dispatched by name") {
  register_random_operator("coinFlipLabel", {"heads", "tails"}, {},
                           [](const RandomOpCall& call) {
                             auto bit = bernoulli_trial(0.5, call.ctx, call.units);
                             return call.args.at(bit ? "heads" : "tails");
                           });
  SaltContext ctx("ns", "exp", "coin");
  Value::Map args{{"heads", "H"}, {"tails", "T"}};
  std::vector<Value> u{Value(1)};
  auto v = call_random_operator("coinFlipLabel", RandomOpCall{ctx, u, args});
  CHECK((v == Value("H") || v == Value("T")));
  CHECK_THROWS_AS(register_random_operator("coinFlipLabel", {}, {}, nullptr), Error);
  CHECK_THROWS_AS(register_random_operator("literal", {}, {}, nullptr), Error);
}
