#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "planout/value.hpp"

namespace planout {

/// Hex-encoded SHA-1 digest.
std::string sha1_hex(std::string_view data);

/// Scopes every draw to (namespace, experiment, parameter). The full salt is
/// "namespace.experiment.parameter"; no component may contain '.'.
class SaltContext {
 public:
  SaltContext(std::string namespace_name, std::string experiment_name,
              std::string parameter_salt = {});

  const std::string& namespace_name() const noexcept { return namespace_; }
  const std::string& experiment_name() const noexcept { return experiment_; }
  const std::string& parameter_salt() const noexcept { return parameter_; }

  /// Same namespace and experiment, different parameter salt.
  SaltContext with_parameter(std::string parameter_salt) const;

  std::string full_salt() const;

  friend bool operator==(const SaltContext&, const SaltContext&) = default;

 private:
  std::string namespace_;
  std::string experiment_;
  std::string parameter_;
};

/// Throws InvalidSalt if `component` is empty or contains '.'.
void check_salt_component(std::string_view component, std::string_view what);

inline constexpr std::uint64_t kHashDrawRange = 1ULL << 60;  // 16^15
inline constexpr double kHashDrawMax = static_cast<double>(kHashDrawRange - 1);

struct HashDraw {
  /// First 15 hex digits of the digest, in [0, 16^15).
  std::uint64_t integer = 0;
  /// integer / (16^15 - 1), in [0, 1].
  double unit_float = 0.0;

  friend bool operator==(const HashDraw&, const HashDraw&) = default;
};

/// Canonical string form of a unit value as it enters the hash: integers in
/// decimal, booleans as 1/0, floats in shortest round-trip form, strings
/// verbatim. Throws EmptyUnit for null and InvalidUnit for lists, maps and
/// any form containing '.'.
std::string unit_string(const Value& unit);

/// The exact text that is hashed:
///   full_salt "." unit_1 "." ... "." unit_n [ "." suffix ]
std::string hash_input(const SaltContext& ctx, std::span<const Value> units,
                       std::optional<std::string_view> suffix = std::nullopt);

/// SHA-1 over hash_input(); throws EmptyUnit when `units` is empty.
HashDraw hash_draw(const SaltContext& ctx, std::span<const Value> units,
                   std::optional<std::string_view> suffix = std::nullopt);

Value uniform_choice(const Value::List& choices, const SaltContext& ctx,
                     std::span<const Value> units);

Value weighted_choice(const Value::List& choices, const std::vector<double>& weights,
                      const SaltContext& ctx, std::span<const Value> units);

/// Returns 0 or 1. p >= 1 always yields 1, otherwise 1 iff unit_float < p.
std::int64_t bernoulli_trial(double p, const SaltContext& ctx, std::span<const Value> units);

std::int64_t random_integer(std::int64_t min, std::int64_t max, const SaltContext& ctx,
                            std::span<const Value> units);

double random_float(double min, double max, const SaltContext& ctx, std::span<const Value> units);

/// Draws without replacement: a descending Fisher-Yates shuffle where the
/// swap partner of position i is hash_draw(ctx, units, suffix=i) mod (i+1);
/// the first `draws` elements are returned.
Value::List sample(const Value::List& choices, std::int64_t draws, const SaltContext& ctx,
                   std::span<const Value> units);

// --- Plug-in random operators ---------------------------------------------------

struct RandomOpCall {
  const SaltContext& ctx;
  std::span<const Value> units;
  /// Evaluated keyword arguments other than `unit` and `salt`.
  const Value::Map& args;
};

using RandomOpFn = std::function<Value(const RandomOpCall&)>;

/// Registers a custom random operator. `required` and `optional` list its
/// keyword arguments besides `unit` and `salt`. Throws InvalidArgument if the
/// name is taken.
void register_random_operator(std::string name, std::vector<std::string> required,
                              std::vector<std::string> optional, RandomOpFn fn);

/// Dispatches a random operator by name, built-in or plug-in.
Value call_random_operator(std::string_view name, const RandomOpCall& call);

}  // namespace planout
