#include "planout/value.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "planout/error.hpp"

namespace planout {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidScript: return "InvalidScript";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::EmptyUnit: return "EmptyUnit";
    case ErrorCode::InvalidUnit: return "InvalidUnit";
    case ErrorCode::InvalidSalt: return "InvalidSalt";
    case ErrorCode::EmptyChoices: return "EmptyChoices";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroTotalWeight: return "ZeroTotalWeight";
    case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::InvertedRange: return "InvertedRange";
    case ErrorCode::DrawsExceedChoices: return "DrawsExceedChoices";
    case ErrorCode::DuplicateNamespace: return "DuplicateNamespace";
    case ErrorCode::UnknownNamespace: return "UnknownNamespace";
    case ErrorCode::DuplicateExperiment: return "DuplicateExperiment";
    case ErrorCode::UnknownExperiment: return "UnknownExperiment";
    case ErrorCode::InsufficientSegments: return "InsufficientSegments";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::VersionConflict: return "VersionConflict";
    case ErrorCode::StoreCorrupt: return "StoreCorrupt";
    case ErrorCode::MalformedOverride: return "MalformedOverride";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
    case ErrorCode::ExpectedTooSmall: return "ExpectedTooSmall";
    case ErrorCode::SinkUnavailable: return "SinkUnavailable";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
  }
  return "Unknown";
}

std::string_view kind_name(Value::Kind kind) {
  switch (kind) {
    case Value::Kind::Null: return "null";
    case Value::Kind::Bool: return "bool";
    case Value::Kind::Int: return "int";
    case Value::Kind::Float: return "float";
    case Value::Kind::String: return "string";
    case Value::Kind::List: return "list";
    case Value::Kind::Map: return "map";
  }
  return "?";
}

double Value::to_double() const {
  switch (kind()) {
    case Kind::Bool: return as_bool() ? 1.0 : 0.0;
    case Kind::Int: return static_cast<double>(as_int());
    case Kind::Float: return as_float();
    default:
      throw Error(ErrorCode::TypeMismatch,
                  "expected a number, got " + std::string(kind_name(kind())));
  }
}

std::int64_t Value::to_int() const {
  switch (kind()) {
    case Kind::Bool: return as_bool() ? 1 : 0;
    case Kind::Int: return as_int();
    default:
      throw Error(ErrorCode::TypeMismatch,
                  "expected an integer, got " + std::string(kind_name(kind())));
  }
}

bool Value::truthy() const {
  switch (kind()) {
    case Kind::Null: return false;
    case Kind::Bool: return as_bool();
    case Kind::Int: return as_int() != 0;
    case Kind::Float: return as_float() != 0.0;
    case Kind::String: return !as_string().empty();
    case Kind::List: return !as_list().empty();
    case Kind::Map: return !as_map().empty();
  }
  return false;
}

bool operator==(const Value& a, const Value& b) { return a.data_ == b.data_; }

bool loosely_equal(const Value& a, const Value& b) {
  if (a.is_numeric() && b.is_numeric()) {
    if (a.is_float() || b.is_float()) return a.to_double() == b.to_double();
    return a.to_int() == b.to_int();
  }
  if (a.kind() != b.kind()) return false;
  if (a.is_list()) {
    const auto& la = a.as_list();
    const auto& lb = b.as_list();
    if (la.size() != lb.size()) return false;
    for (std::size_t i = 0; i < la.size(); ++i) {
      if (!loosely_equal(la[i], lb[i])) return false;
    }
    return true;
  }
  if (a.is_map()) {
    const auto& ma = a.as_map();
    const auto& mb = b.as_map();
    if (ma.size() != mb.size()) return false;
    for (auto ia = ma.begin(), ib = mb.begin(); ia != ma.end(); ++ia, ++ib) {
      if (ia->first != ib->first || !loosely_equal(ia->second, ib->second)) return false;
    }
    return true;
  }
  return a == b;
}

nlohmann::json to_json(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Null: return nullptr;
    case Value::Kind::Bool: return v.as_bool();
    case Value::Kind::Int: return v.as_int();
    case Value::Kind::Float: return v.as_float();
    case Value::Kind::String: return v.as_string();
    case Value::Kind::List: {
      auto arr = nlohmann::json::array();
      for (const auto& item : v.as_list()) arr.push_back(to_json(item));
      return arr;
    }
    case Value::Kind::Map: {
      auto obj = nlohmann::json::object();
      for (const auto& [k, item] : v.as_map()) obj[k] = to_json(item);
      return obj;
    }
  }
  return nullptr;
}

Value from_json(const nlohmann::json& j) {
  using T = nlohmann::json::value_t;
  switch (j.type()) {
    case T::null: return Value();
    case T::boolean: return Value(j.get<bool>());
    case T::number_integer: return Value(j.get<std::int64_t>());
    case T::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw Error(ErrorCode::SchemaError, "integer out of 64-bit signed range");
      }
      return Value(static_cast<std::int64_t>(u));
    }
    case T::number_float: return Value(j.get<double>());
    case T::string: return Value(j.get<std::string>());
    case T::array: {
      Value::List list;
      list.reserve(j.size());
      for (const auto& item : j) list.push_back(from_json(item));
      return Value(std::move(list));
    }
    case T::object: {
      Value::Map map;
      for (auto it = j.begin(); it != j.end(); ++it) map.emplace(it.key(), from_json(it.value()));
      return Value(std::move(map));
    }
    default:
      throw Error(ErrorCode::SchemaError, "unsupported JSON value");
  }
}

std::string canonical_text(const Value& v) { return to_json(v).dump(); }

std::string canonical_text(const Value::Map& m) { return to_json(Value(m)).dump(); }

Value parse_typed_scalar(std::string_view raw) {
  if (raw.empty()) return Value(std::string());
  const char* first = raw.data();
  const char* last = raw.data() + raw.size();
  if (*first == '+') return Value(std::string(raw));

  std::int64_t i = 0;
  auto [iend, iec] = std::from_chars(first, last, i);
  if (iec == std::errc() && iend == last) return Value(i);

  double d = 0;
  auto [dend, dec] = std::from_chars(first, last, d, std::chars_format::general);
  if (dec == std::errc() && dend == last && std::isfinite(d)) return Value(d);

  return Value(std::string(raw));
}

}  // namespace planout
