#include "planout/random_ops.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>

#include <openssl/evp.h>

#include "planout/error.hpp"
#include "planout/ir.hpp"

namespace planout {

std::string sha1_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(static_cast<std::size_t>(len) * 2, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = kHex[digest[i] >> 4];
    out[2 * i + 1] = kHex[digest[i] & 0x0f];
  }
  return out;
}

void check_salt_component(std::string_view component, std::string_view what) {
  if (component.empty()) {
    throw Error(ErrorCode::InvalidSalt, std::string(what) + " must not be empty");
  }
  if (component.find('.') != std::string_view::npos) {
    throw Error(ErrorCode::InvalidSalt,
                std::string(what) + " '" + std::string(component) + "' must not contain '.'");
  }
}

SaltContext::SaltContext(std::string namespace_name, std::string experiment_name,
                         std::string parameter_salt)
    : namespace_(std::move(namespace_name)),
      experiment_(std::move(experiment_name)),
      parameter_(std::move(parameter_salt)) {
  check_salt_component(namespace_, "namespace name");
  check_salt_component(experiment_, "experiment name");
  if (!parameter_.empty()) check_salt_component(parameter_, "parameter salt");
}

SaltContext SaltContext::with_parameter(std::string parameter_salt) const {
  return SaltContext(namespace_, experiment_, std::move(parameter_salt));
}

std::string SaltContext::full_salt() const {
  check_salt_component(parameter_, "parameter salt");
  std::string out;
  out.reserve(namespace_.size() + experiment_.size() + parameter_.size() + 2);
  out += namespace_;
  out += '.';
  out += experiment_;
  out += '.';
  out += parameter_;
  return out;
}

std::string unit_string(const Value& unit) {
  std::string out;
  switch (unit.kind()) {
    case Value::Kind::Null:
      throw Error(ErrorCode::EmptyUnit, "unit value is null (missing input data?)");
    case Value::Kind::Bool:
      return unit.as_bool() ? "1" : "0";
    case Value::Kind::Int:
      return std::to_string(unit.as_int());
    case Value::Kind::Float: {
      double d = unit.as_float();
      if (!std::isfinite(d)) throw Error(ErrorCode::InvalidUnit, "unit value is not finite");
      std::array<char, 32> buf{};
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
      out.assign(buf.data(), end);
      break;
    }
    case Value::Kind::String:
      out = unit.as_string();
      break;
    case Value::Kind::List:
    case Value::Kind::Map:
      throw Error(ErrorCode::InvalidUnit,
                  "unit value must be a scalar, got " + std::string(kind_name(unit.kind())));
  }
  if (out.find('.') != std::string::npos) {
    throw Error(ErrorCode::InvalidUnit, "unit value '" + out + "' must not contain '.'");
  }
  return out;
}

std::string hash_input(const SaltContext& ctx, std::span<const Value> units,
                       std::optional<std::string_view> suffix) {
  if (units.empty()) throw Error(ErrorCode::EmptyUnit, "no unit given for random assignment");
  std::string text = ctx.full_salt();
  for (const auto& u : units) {
    text += '.';
    text += unit_string(u);
  }
  if (suffix) {
    text += '.';
    text += *suffix;
  }
  return text;
}

HashDraw hash_draw(const SaltContext& ctx, std::span<const Value> units,
                   std::optional<std::string_view> suffix) {
  std::string digest = sha1_hex(hash_input(ctx, units, suffix));
  HashDraw draw;
  std::from_chars(digest.data(), digest.data() + 15, draw.integer, 16);
  draw.unit_float = static_cast<double>(draw.integer) / kHashDrawMax;
  return draw;
}

Value uniform_choice(const Value::List& choices, const SaltContext& ctx,
                     std::span<const Value> units) {
  if (choices.empty()) throw Error(ErrorCode::EmptyChoices, "uniformChoice needs at least one choice");
  auto draw = hash_draw(ctx, units);
  return choices[draw.integer % choices.size()];
}

Value weighted_choice(const Value::List& choices, const std::vector<double>& weights,
                      const SaltContext& ctx, std::span<const Value> units) {
  if (choices.size() != weights.size()) {
    throw Error(ErrorCode::LengthMismatch, "weightedChoice has " + std::to_string(choices.size()) +
                                               " choices but " + std::to_string(weights.size()) +
                                               " weights");
  }
  if (choices.empty()) throw Error(ErrorCode::EmptyChoices, "weightedChoice needs at least one choice");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::InvalidArgument, "weightedChoice weights must be finite and non-negative");
    }
    total += w;
  }
  if (total <= 0.0) throw Error(ErrorCode::ZeroTotalWeight, "weightedChoice weights sum to zero");

  double stop = hash_draw(ctx, units).unit_float * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cumulative += weights[i];
    last_positive = i;
    if (cumulative >= stop) return choices[i];
  }
  // Rounding can leave the running sum a hair below `stop` when the draw is 1.0.
  return choices[last_positive];
}

std::int64_t bernoulli_trial(double p, const SaltContext& ctx, std::span<const Value> units) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::ProbabilityOutOfRange,
                "bernoulliTrial probability must be in [0, 1], got " + std::to_string(p));
  }
  auto draw = hash_draw(ctx, units);
  if (p >= 1.0) return 1;
  return draw.unit_float < p ? 1 : 0;
}

std::int64_t random_integer(std::int64_t min, std::int64_t max, const SaltContext& ctx,
                            std::span<const Value> units) {
  if (min > max) {
    throw Error(ErrorCode::InvertedRange, "randomInteger min " + std::to_string(min) +
                                              " exceeds max " + std::to_string(max));
  }
  auto draw = hash_draw(ctx, units);
  auto span = static_cast<unsigned __int128>(static_cast<__int128>(max) - min) + 1;
  auto offset = static_cast<__int128>(draw.integer % span);
  return static_cast<std::int64_t>(static_cast<__int128>(min) + offset);
}

double random_float(double min, double max, const SaltContext& ctx, std::span<const Value> units) {
  if (!(min <= max)) {
    throw Error(ErrorCode::InvertedRange, "randomFloat min exceeds max");
  }
  auto draw = hash_draw(ctx, units);
  double v = min + draw.unit_float * (max - min);
  return std::min(std::max(v, min), max);
}

Value::List sample(const Value::List& choices, std::int64_t draws, const SaltContext& ctx,
                   std::span<const Value> units) {
  if (draws < 0 || static_cast<std::uint64_t>(draws) > choices.size()) {
    throw Error(ErrorCode::DrawsExceedChoices,
                "sample draws " + std::to_string(draws) + " outside [0, " +
                    std::to_string(choices.size()) + "]");
  }
  Value::List shuffled = choices;
  for (std::size_t i = shuffled.size(); i-- > 1;) {
    auto draw = hash_draw(ctx, units, std::to_string(i));
    std::size_t j = draw.integer % (i + 1);
    std::swap(shuffled[i], shuffled[j]);
  }
  shuffled.resize(static_cast<std::size_t>(draws));
  return shuffled;
}

// --- Dispatch ---------------------------------------------------------------------

namespace {

const Value& arg(const RandomOpCall& call, std::string_view op, std::string_view key) {
  auto it = call.args.find(key);
  if (it == call.args.end()) {
    throw Error(ErrorCode::InvalidScript,
                std::string(op) + " is missing argument '" + std::string(key) + "'");
  }
  return it->second;
}

const Value::List& list_arg(const RandomOpCall& call, std::string_view op, std::string_view key) {
  const Value& v = arg(call, op, key);
  if (!v.is_list()) {
    throw Error(ErrorCode::TypeMismatch, std::string(op) + " argument '" + std::string(key) +
                                             "' must be a list, got " +
                                             std::string(kind_name(v.kind())));
  }
  return v.as_list();
}

struct PluginTable {
  std::shared_mutex mutex;
  std::map<std::string, RandomOpFn, std::less<>> ops;
};

PluginTable& plugins() {
  static PluginTable table;
  return table;
}

}  // namespace

void register_random_operator(std::string name, std::vector<std::string> required,
                              std::vector<std::string> optional, RandomOpFn fn) {
  OperatorInfo info;
  info.name = name;
  info.cls = OperatorClass::Random;
  info.required_kwargs = std::move(required);
  info.optional_kwargs = std::move(optional);
  register_operator_info(std::move(info));
  auto& table = plugins();
  std::unique_lock lock(table.mutex);
  table.ops.emplace(std::move(name), std::move(fn));
}

Value call_random_operator(std::string_view name, const RandomOpCall& call) {
  if (name == "uniformChoice") {
    return uniform_choice(list_arg(call, name, "choices"), call.ctx, call.units);
  }
  if (name == "weightedChoice") {
    std::vector<double> weights;
    for (const auto& w : list_arg(call, name, "weights")) weights.push_back(w.to_double());
    return weighted_choice(list_arg(call, name, "choices"), weights, call.ctx, call.units);
  }
  if (name == "bernoulliTrial") {
    return Value(bernoulli_trial(arg(call, name, "p").to_double(), call.ctx, call.units));
  }
  if (name == "randomInteger") {
    return Value(random_integer(arg(call, name, "min").to_int(), arg(call, name, "max").to_int(),
                                call.ctx, call.units));
  }
  if (name == "randomFloat") {
    return Value(random_float(arg(call, name, "min").to_double(),
                              arg(call, name, "max").to_double(), call.ctx, call.units));
  }
  if (name == "sample") {
    const auto& choices = list_arg(call, name, "choices");
    auto it = call.args.find("draws");
    std::int64_t draws = it == call.args.end() ? static_cast<std::int64_t>(choices.size())
                                               : it->second.to_int();
    return Value(sample(choices, draws, call.ctx, call.units));
  }
  auto& table = plugins();
  std::shared_lock lock(table.mutex);
  auto it = table.ops.find(name);
  if (it == table.ops.end()) {
    throw Error(ErrorCode::InvalidScript, "no implementation for operator '" + std::string(name) + "'");
  }
  const RandomOpFn& fn = it->second;
  lock.unlock();
  return fn(call);
}

}  // namespace planout
