#include <doctest.h>

#include <algorithm>

#include "planout/error.hpp"
#include "planout/ir.hpp"
#include "test_support.hpp"

using namespace planout;
using namespace planout::testing;

namespace {

using Units = std::vector<std::pair<std::string, std::vector<std::string>>>;

ErrorCode deserialize_error(std::string_view text) {
  try {
    deserialize(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("deserialize accepted invalid text");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("serialize: empty script and a single constant assignment") {
  ScriptIR empty;
  CHECK(serialize(empty) == R"({"format_version":"1","statements":[]})");

  auto ir = parse_or_throw("x = 2;");
  CHECK(serialize(ir) ==
        R"({"format_version":"1","statements":[{"op":"set","value":{"op":"literal","value":2},"var":"x"}]})");
}

TEST_CASE("serialize/deserialize round trip on every corpus script") {
  for (const auto& name : corpus_names()) {
    CAPTURE(name);
    auto ir = corpus_ir(name);
    auto text = serialize(ir);
    auto back = deserialize(text);
    CHECK(back == ir);
    CHECK(serialize(back) == text);
  }
}

TEST_CASE("serialize/deserialize round trip on generated IRs") {
  IrGenerator gen(20240611);
  for (int i = 0; i < 500; ++i) {
    auto ir = gen.script();
    auto text = serialize(ir);
    auto back = deserialize(text);
    REQUIRE(back == ir);
    REQUIRE(serialize(back) == text);
  }
}

TEST_CASE("deserialize rejects unknown operators, missing fields and truncation") {
  std::string unknown =
      R"({"format_version":"1","statements":[{"op":"set","var":"x","value":{"op":"fooChoice","kwargs":{}}}]})";
  CHECK(deserialize_error(unknown) == ErrorCode::SchemaError);

  std::string missing = R"({"format_version":"1","statements":[{"op":"set","var":"x"}]})";
  CHECK(deserialize_error(missing) == ErrorCode::SchemaError);

  std::string extra =
      R"({"format_version":"1","statements":[{"op":"set","var":"x","value":{"op":"literal","value":1},"bogus":1}]})";
  CHECK(deserialize_error(extra) == ErrorCode::SchemaError);

  CHECK(deserialize_error(R"({"format_version":"2","statements":[]})") == ErrorCode::SchemaError);

  auto full = serialize(corpus_ir("signup_factorial"));
  auto truncated = full.substr(0, full.size() / 2);
  try {
    deserialize(truncated);
    FAIL("truncated text accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    REQUIRE(e.offset().has_value());
    CHECK(*e.offset() <= truncated.size());
  }
}

TEST_CASE("validate: corpus scripts have no errors") {
  for (const auto& name : corpus_names()) {
    CAPTURE(name);
    CHECK_FALSE(has_errors(validate(corpus_ir(name))));
  }
  CHECK(validate(corpus_ir("signup_factorial")).empty());
  CHECK(validate(corpus_ir("voter_turnout")).empty());
  CHECK(validate(corpus_ir("comment_collapse")).empty());
}

TEST_CASE("validate: random op without unit") {
  auto diags = validate(parse_or_throw("y = uniformChoice(choices=[1,2]);"));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].is_error());
  CHECK(diags[0].message == "random op missing unit");
  CHECK(diags[0].offset == std::optional<std::size_t>(4));
}

TEST_CASE("validate: possibly-unbound variable is a warning") {
  auto diags = validate(parse_or_throw("z = x + 1;"));
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].severity == Diagnostic::Severity::Warning);
  CHECK(diags[0].message == "possibly-unbound variable 'x'");
  CHECK_FALSE(has_errors(diags));

  // Units are inputs declared by usage.
  CHECK(validate(parse_or_throw("a = bernoulliTrial(p=0.5, unit=u); b = u;")).empty());
  // Assigned on only one branch.
  auto partial = validate(parse_or_throw(
      "a = bernoulliTrial(p=0.5, unit=u); if (a) { b = 1; } c = b;"));
  REQUIRE(partial.size() == 1);
  CHECK(partial[0].message == "possibly-unbound variable 'b'");
  // Assigned on every branch.
  CHECK(validate(parse_or_throw(
                     "a = bernoulliTrial(p=0.5, unit=u); if (a) { b = 1; } else { b = 2; } c = b;"))
            .empty());
}

TEST_CASE("validate: operator registry, arity and arguments") {
  auto has = [](const std::vector<Diagnostic>& diags, std::string_view needle) {
    return std::any_of(diags.begin(), diags.end(), [&](const Diagnostic& d) {
      return d.is_error() && d.message.find(needle) != std::string::npos;
    });
  };
  CHECK(has(validate(parse_or_throw("x = fooChoice(choices=[1], unit=u);")), "unknown operator 'fooChoice'"));
  CHECK(has(validate(parse_or_throw("x = frob(1);")), "unknown operator 'frob'"));
  CHECK(has(validate(parse_or_throw("x = length(1, 2);")), "expects 1 argument"));
  CHECK(has(validate(parse_or_throw("x = bernoulliTrial(unit=u);")), "missing argument 'p'"));
  CHECK(has(validate(parse_or_throw("x = bernoulliTrial(p=0.5, q=1, unit=u);")), "no argument 'q'"));
  CHECK(has(validate(parse_or_throw("x = bernoulliTrial(p=0.5, unit=u, salt=s);")), "salt must be"));
  CHECK(has(validate(parse_or_throw("x = bernoulliTrial(p=0.5, unit=u, salt='a.b');")), "'.'"));
  CHECK(has(validate(parse_or_throw(
                "x = weightedChoice(choices=[1, 2, 3], weights=[0.5, 0.5], unit=u);")),
            "3 choices but 2 weights"));
  CHECK(has(validate(parse_or_throw("if (bernoulliTrial(p=0.5, unit=u)) { x = 1; }")),
            "explicit salt"));
  CHECK_FALSE(has_errors(
      validate(parse_or_throw("if (bernoulliTrial(p=0.5, unit=u, salt='gate')) { x = 1; }"))));
}

TEST_CASE("validate is pure") {
  for (const auto& name : corpus_names()) {
    auto ir = corpus_ir(name);
    CHECK(validate(ir) == validate(ir));
  }
}

TEST_CASE("list_parameters in first-assignment order") {
  using V = std::vector<std::string>;
  CHECK(list_parameters(corpus_ir("signup_factorial")) == V{"button_color", "button_text"});
  CHECK(list_parameters(corpus_ir("voter_turnout")) ==
        V{"has_banner", "cond_probs", "has_feed_stories", "button_text"});
  CHECK(list_parameters(corpus_ir("goal_setting")) ==
        V{"group_size", "specific_goal", "ratings_per_user_goal", "ratings_goal"});
  CHECK(list_parameters(corpus_ir("translate_branching")) == V{"has_translate"});
  CHECK(list_parameters(ScriptIR{}).empty());
}

TEST_CASE("list_units identifies the unit of every random assignment") {
  CHECK(list_units(corpus_ir("comment_collapse")) ==
        Units{{"collapse_story", {"viewerid", "storyid"}}});
  CHECK(list_units(corpus_ir("feedback_encouragement")) ==
        Units{{"prob_collapse", {"sourceid"}}, {"collapse", {"storyid", "viewerid"}}});
  CHECK(list_units(corpus_ir("social_cues")) ==
        Units{{"num_cues", {"userid", "pageid"}}, {"friends_shown", {"userid", "pageid"}}});
  CHECK(list_units(parse_or_throw("x = 2;")).empty());
  CHECK(list_units(parse_or_throw("x = uniformChoice(choices=[1], unit=ids[0]);")) ==
        Units{{"x", {std::string(kDynamicUnit)}}});
}

TEST_CASE("script_digest is the SHA-1 of the canonical text") {
  auto ir = corpus_ir("voter_turnout");
  CHECK(script_digest(ir).size() == 40);
  CHECK(script_digest(ir) == script_digest(deserialize(serialize(ir))));
  CHECK(script_digest(ir) != script_digest(corpus_ir("signup_factorial")));
}
