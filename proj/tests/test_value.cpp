#include <doctest.h>

#include "planout/error.hpp"
#include "planout/value.hpp"

using namespace planout;

TEST_CASE("booleans compare as 1 and 0 in script equality") {
  CHECK(loosely_equal(Value(true), Value(1)));
  CHECK(loosely_equal(Value(false), Value(0)));
  CHECK_FALSE(loosely_equal(Value(true), Value(2)));
  CHECK(loosely_equal(Value(1), Value(1.0)));
  CHECK_FALSE(loosely_equal(Value("1"), Value(1)));
  CHECK(loosely_equal(Value(Value::List{true, 2}), Value(Value::List{1, 2.0})));
  // Structural equality keeps kinds apart.
  CHECK(Value(1) != Value(1.0));
  CHECK(Value(true) != Value(1));
}

TEST_CASE("truthiness") {
  CHECK_FALSE(Value().truthy());
  CHECK_FALSE(Value(false).truthy());
  CHECK_FALSE(Value(0).truthy());
  CHECK_FALSE(Value(0.0).truthy());
  CHECK_FALSE(Value("").truthy());
  CHECK_FALSE(Value(Value::List{}).truthy());
  CHECK(Value(-1).truthy());
  CHECK(Value("0").truthy());
  CHECK(Value(Value::List{Value()}).truthy());
}

TEST_CASE("canonical text keeps int and float apart and sorts keys") {
  CHECK(canonical_text(Value(2)) == "2");
  CHECK(canonical_text(Value(2.0)) == "2.0");
  CHECK(canonical_text(Value(0.1)) == "0.1");
  Value::Map m{{"b", 1}, {"a", Value::List{true, Value(), "x"}}};
  CHECK(canonical_text(m) == R"({"a":[true,null,"x"],"b":1})");
}

TEST_CASE("JSON round trip preserves kinds") {
  Value v(Value::Map{{"i", 3}, {"f", 3.5}, {"s", "t"}, {"l", Value::List{1, 2.0}}, {"n", Value()}});
  CHECK(from_json(to_json(v)) == v);
}

TEST_CASE("unsigned JSON integers beyond int64 are rejected") {
  CHECK_THROWS_AS(from_json(nlohmann::json::parse("18446744073709551615")), Error);
  CHECK(from_json(nlohmann::json::parse("9223372036854775807")).as_int() == 9223372036854775807LL);
}

TEST_CASE("parse_typed_scalar: integer, then float, then string") {
  CHECK(parse_typed_scalar("1") == Value(1));
  CHECK(parse_typed_scalar("-7") == Value(-7));
  CHECK(parse_typed_scalar("0.25") == Value(0.25));
  CHECK(parse_typed_scalar("1e3") == Value(1000.0));
  CHECK(parse_typed_scalar("US") == Value("US"));
  CHECK(parse_typed_scalar("12abc") == Value("12abc"));
  CHECK(parse_typed_scalar("") == Value(""));
  CHECK(parse_typed_scalar("nan") == Value("nan"));
  CHECK(parse_typed_scalar("99999999999999999999") == Value(1e20));
}

TEST_CASE("numeric accessors reject non-numbers") {
  CHECK(Value(true).to_int() == 1);
  CHECK(Value(3).to_double() == 3.0);
  CHECK_THROWS_AS(Value("3").to_double(), Error);
  CHECK_THROWS_AS(Value(2.5).to_int(), Error);
}
