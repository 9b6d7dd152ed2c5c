#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace planout {

/// Dynamically typed script value. Integers and floats are distinct kinds;
/// booleans compare equal to the integers 1 and 0.
class Value {
 public:
  using List = std::vector<Value>;
  using Map = std::map<std::string, Value, std::less<>>;
  using Storage =
      std::variant<std::nullptr_t, bool, std::int64_t, double, std::string, List, Map>;

  enum class Kind { Null, Bool, Int, Float, String, List, Map };

  Value() : data_(nullptr) {}
  Value(std::nullptr_t) : data_(nullptr) {}
  Value(bool b) : data_(b) {}
  Value(int i) : data_(static_cast<std::int64_t>(i)) {}
  Value(std::int64_t i) : data_(i) {}
  Value(double d) : data_(d) {}
  Value(const char* s) : data_(std::string(s)) {}
  Value(std::string s) : data_(std::move(s)) {}
  Value(std::string_view s) : data_(std::string(s)) {}
  Value(List l) : data_(std::move(l)) {}
  Value(Map m) : data_(std::move(m)) {}

  Kind kind() const noexcept { return static_cast<Kind>(data_.index()); }
  bool is_null() const noexcept { return kind() == Kind::Null; }
  bool is_bool() const noexcept { return kind() == Kind::Bool; }
  bool is_int() const noexcept { return kind() == Kind::Int; }
  bool is_float() const noexcept { return kind() == Kind::Float; }
  bool is_string() const noexcept { return kind() == Kind::String; }
  bool is_list() const noexcept { return kind() == Kind::List; }
  bool is_map() const noexcept { return kind() == Kind::Map; }
  /// Bool, Int or Float.
  bool is_numeric() const noexcept { return is_bool() || is_int() || is_float(); }

  bool as_bool() const { return std::get<bool>(data_); }
  std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
  double as_float() const { return std::get<double>(data_); }
  const std::string& as_string() const { return std::get<std::string>(data_); }
  const List& as_list() const { return std::get<List>(data_); }
  const Map& as_map() const { return std::get<Map>(data_); }

  /// Numeric value as a double; bools count as 0/1. Throws TypeMismatch.
  double to_double() const;
  /// Integer value; bools count as 0/1. Throws TypeMismatch for other kinds.
  std::int64_t to_int() const;

  /// false, 0, 0.0, "", [] and {} and null are falsy.
  bool truthy() const;

  const Storage& storage() const noexcept { return data_; }

  /// Structural equality; kinds must match exactly.
  friend bool operator==(const Value& a, const Value& b);
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

 private:
  Storage data_;
};

std::string_view kind_name(Value::Kind kind);

/// Script-level equality: Bool, Int and Float compare numerically, lists and
/// maps element-wise under the same rule, other kind pairs are unequal.
bool loosely_equal(const Value& a, const Value& b);

nlohmann::json to_json(const Value& v);
/// Unsigned integers beyond the int64 range are rejected with SchemaError.
Value from_json(const nlohmann::json& j);

/// Canonical text: compact JSON, map keys sorted, shortest round-trip floats
/// (integral floats keep a trailing ".0").
std::string canonical_text(const Value& v);
std::string canonical_text(const Value::Map& m);

/// Parse-precedence typing used for overrides, query strings and CLI inputs:
/// integer, then float, then bare string.
Value parse_typed_scalar(std::string_view raw);

}  // namespace planout
