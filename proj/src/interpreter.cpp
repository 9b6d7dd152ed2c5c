#include "planout/interpreter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "planout/error.hpp"

namespace planout {

Assignment::Assignment(Params params, SaltContext ctx, bool in_experiment)
    : params_(std::move(params)),
      ctx_(std::move(ctx)),
      in_experiment_(in_experiment),
      exposure_(std::make_shared<ExposureState>()) {}

const Value* Assignment::find(std::string_view name) const {
  for (const auto& [key, value] : params_) {
    if (key == name) return &value;
  }
  return nullptr;
}

Value Assignment::get(std::string_view name, Value fallback) const {
  const Value* v = find(name);
  if (v == nullptr) return fallback;
  if (in_experiment_ && !exposure_->exposed.exchange(true) && exposure_->hook) {
    exposure_->hook(*this);
  }
  return *v;
}

bool Assignment::exposed() const noexcept { return exposure_->exposed.load(); }

void Assignment::set_exposure_hook(ExposureHook hook) { exposure_->hook = std::move(hook); }

Value::Map Assignment::params_map() const {
  Value::Map out;
  for (const auto& [key, value] : params_) out.insert_or_assign(key, value);
  return out;
}

std::string Assignment::to_text() const {
  std::string out = "{";
  for (const auto& [key, value] : params_) {
    if (out.size() > 1) out += ',';
    out += nlohmann::json(key).dump();
    out += ':';
    out += canonical_text(value);
  }
  out += '}';
  return out;
}

namespace {

struct StopEvaluation {
  bool in_experiment;
};

[[noreturn]] void type_error(const std::string& message, const Expr& at) {
  throw Error(ErrorCode::TypeMismatch, message, at.offset);
}

void require_numeric(const Value& v, std::string_view op, const Expr& at) {
  if (!v.is_numeric()) {
    type_error("operator '" + std::string(op) + "' needs numbers, got " +
                   std::string(kind_name(v.kind())),
               at);
  }
}

Value arithmetic(const std::string& op, const Value& a, const Value& b, const Expr& at) {
  require_numeric(a, op, at);
  require_numeric(b, op, at);
  if (op == "div") {
    double d = b.to_double();
    if (d == 0.0) throw Error(ErrorCode::DivisionByZero, "division by zero", at.offset);
    return Value(a.to_double() / d);
  }
  if (op == "mod") {
    if (a.is_float() || b.is_float()) type_error("operator '%' needs integers", at);
    std::int64_t d = b.to_int();
    if (d == 0) throw Error(ErrorCode::DivisionByZero, "modulo by zero", at.offset);
    if (d == -1) return Value(std::int64_t{0});
    return Value(a.to_int() % d);
  }
  if (a.is_float() || b.is_float()) {
    double x = a.to_double();
    double y = b.to_double();
    if (op == "add") return Value(x + y);
    if (op == "sub") return Value(x - y);
    return Value(x * y);
  }
  std::int64_t x = a.to_int();
  std::int64_t y = b.to_int();
  std::int64_t r = 0;
  bool overflow = op == "add"   ? __builtin_add_overflow(x, y, &r)
                  : op == "sub" ? __builtin_sub_overflow(x, y, &r)
                                : __builtin_mul_overflow(x, y, &r);
  if (overflow) throw Error(ErrorCode::Overflow, "integer overflow in '" + op + "'", at.offset);
  return Value(r);
}

bool ordered_compare(const std::string& op, const Value& a, const Value& b, const Expr& at) {
  int cmp = 0;
  if (a.is_numeric() && b.is_numeric()) {
    if (a.is_float() || b.is_float()) {
      double x = a.to_double();
      double y = b.to_double();
      cmp = x < y ? -1 : (x > y ? 1 : 0);
    } else {
      std::int64_t x = a.to_int();
      std::int64_t y = b.to_int();
      cmp = x < y ? -1 : (x > y ? 1 : 0);
    }
  } else if (a.is_string() && b.is_string()) {
    cmp = a.as_string().compare(b.as_string());
    cmp = cmp < 0 ? -1 : (cmp > 0 ? 1 : 0);
  } else {
    type_error("cannot order " + std::string(kind_name(a.kind())) + " and " +
                   std::string(kind_name(b.kind())),
               at);
  }
  if (op == "lt") return cmp < 0;
  if (op == "le") return cmp <= 0;
  if (op == "gt") return cmp > 0;
  return cmp >= 0;
}

class Evaluator {
 public:
  Evaluator(const Inputs& inputs, const Overrides& overrides, const SaltContext& ctx)
      : inputs_(inputs), overrides_(overrides), ctx_(ctx) {}

  Assignment run(const ScriptIR& ir) {
    bool in_experiment = true;
    try {
      exec_block(ir.statements);
    } catch (const StopEvaluation& stop) {
      in_experiment = stop.in_experiment;
    }
    if (!overrides_.empty()) {
      for (const auto& name : list_parameters(ir)) {
        auto it = overrides_.find(name);
        if (it != overrides_.end() && index_.count(name) == 0) record(name, it->second);
      }
    }
    return Assignment(std::move(params_), ctx_, in_experiment);
  }

 private:
  void record(const std::string& name, Value value) {
    auto it = index_.find(name);
    if (it == index_.end()) {
      index_.emplace(name, params_.size());
      params_.emplace_back(name, std::move(value));
    } else {
      params_[it->second].second = std::move(value);
    }
  }

  const Value& lookup(const Expr& at) const {
    if (auto it = overrides_.find(at.name); it != overrides_.end()) return it->second;
    if (auto it = index_.find(at.name); it != index_.end()) return params_[it->second].second;
    if (auto it = inputs_.find(at.name); it != inputs_.end()) return it->second;
    throw Error(ErrorCode::MissingInput, "missing input '" + at.name + "'", at.offset);
  }

  void exec_block(const std::vector<Stmt>& stmts) {
    for (const auto& s : stmts) exec(s);
  }

  void exec(const Stmt& s) {
    switch (s.kind) {
      case StmtKind::Assign: {
        if (auto it = overrides_.find(s.target); it != overrides_.end()) {
          record(s.target, it->second);
          return;
        }
        target_ = &s.target;
        Value v = eval(s.value);
        target_ = nullptr;
        record(s.target, std::move(v));
        return;
      }
      case StmtKind::If:
        for (const auto& b : s.branches) {
          if (eval(b.condition).truthy()) {
            exec_block(b.body);
            return;
          }
        }
        if (s.else_body) exec_block(*s.else_body);
        return;
      case StmtKind::Block:
        exec_block(s.body);
        return;
      case StmtKind::Return:
        throw StopEvaluation{eval(s.value).truthy()};
    }
  }

  Value eval(const Expr& e) {
    switch (e.kind) {
      case ExprKind::Literal:
        return e.literal;
      case ExprKind::Variable:
        return lookup(e);
      case ExprKind::Array: {
        Value::List items;
        items.reserve(e.args.size());
        for (const auto& a : e.args) items.push_back(eval(a));
        return Value(std::move(items));
      }
      case ExprKind::Index:
        return index(e);
      case ExprKind::Builtin:
        return builtin(e);
      case ExprKind::Random:
        return random(e);
    }
    return Value();
  }

  Value index(const Expr& e) {
    Value base = eval(e.args[0]);
    Value idx = eval(e.args[1]);
    if (base.is_list()) {
      if (!(idx.is_int() || idx.is_bool())) {
        type_error("list index must be an integer or boolean, got " +
                       std::string(kind_name(idx.kind())),
                   e);
      }
      std::int64_t i = idx.to_int();
      const auto& list = base.as_list();
      if (i < 0 || static_cast<std::uint64_t>(i) >= list.size()) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "index " + std::to_string(i) + " out of range for list of length " +
                        std::to_string(list.size()),
                    e.offset);
      }
      return list[static_cast<std::size_t>(i)];
    }
    if (base.is_map()) {
      if (!idx.is_string()) type_error("map index must be a string", e);
      const auto& map = base.as_map();
      auto it = map.find(idx.as_string());
      if (it == map.end()) {
        throw Error(ErrorCode::IndexOutOfRange, "key '" + idx.as_string() + "' not found",
                    e.offset);
      }
      return it->second;
    }
    type_error("cannot index a " + std::string(kind_name(base.kind())), e);
  }

  Value builtin(const Expr& e) {
    const std::string& op = e.name;
    if (op == "and") {
      for (const auto& a : e.args) {
        if (!eval(a).truthy()) return Value(false);
      }
      return Value(true);
    }
    if (op == "or") {
      for (const auto& a : e.args) {
        if (eval(a).truthy()) return Value(true);
      }
      return Value(false);
    }

    std::vector<Value> args;
    args.reserve(e.args.size());
    for (const auto& a : e.args) args.push_back(eval(a));
    auto need = [&](std::size_t n) {
      if (args.size() != n) {
        throw Error(ErrorCode::InvalidScript,
                    "operator '" + op + "' expects " + std::to_string(n) + " argument(s)", e.offset);
      }
    };

    if (op == "add" || op == "sub" || op == "mul" || op == "div" || op == "mod") {
      need(2);
      return arithmetic(op, args[0], args[1], e);
    }
    if (op == "eq" || op == "ne") {
      need(2);
      bool eq = loosely_equal(args[0], args[1]);
      return Value(op == "eq" ? eq : !eq);
    }
    if (op == "lt" || op == "le" || op == "gt" || op == "ge") {
      need(2);
      return Value(ordered_compare(op, args[0], args[1], e));
    }
    if (op == "not") {
      need(1);
      return Value(!args[0].truthy());
    }
    if (op == "neg") {
      need(1);
      require_numeric(args[0], "-", e);
      if (args[0].is_float()) return Value(-args[0].as_float());
      std::int64_t v = args[0].to_int();
      if (v == std::numeric_limits<std::int64_t>::min()) {
        throw Error(ErrorCode::Overflow, "integer overflow in negation", e.offset);
      }
      return Value(-v);
    }
    if (op == "length") {
      need(1);
      const Value& v = args[0];
      if (v.is_list()) return Value(static_cast<std::int64_t>(v.as_list().size()));
      if (v.is_string()) return Value(static_cast<std::int64_t>(v.as_string().size()));
      if (v.is_map()) return Value(static_cast<std::int64_t>(v.as_map().size()));
      type_error("length() needs a list, string or map, got " + std::string(kind_name(v.kind())), e);
    }
    if (op == "min" || op == "max") {
      const std::vector<Value>* items = &args;
      std::vector<Value> unpacked;
      if (args.size() == 1 && args[0].is_list()) {
        unpacked = args[0].as_list();
        items = &unpacked;
      }
      if (items->empty()) throw Error(ErrorCode::InvalidArgument, op + "() of nothing", e.offset);
      const Value* best = &items->front();
      for (const auto& v : *items) {
        bool better = op == "min" ? ordered_compare("lt", v, *best, e)
                                  : ordered_compare("gt", v, *best, e);
        if (better) best = &v;
      }
      return *best;
    }
    if (op == "round") {
      need(1);
      require_numeric(args[0], "round", e);
      if (!args[0].is_float()) return Value(args[0].to_int());
      double r = std::round(args[0].as_float());
      if (!(r >= -9.2233720368547758e18 && r < 9.2233720368547758e18)) {
        throw Error(ErrorCode::Overflow, "round() result out of integer range", e.offset);
      }
      return Value(static_cast<std::int64_t>(r));
    }
    if (op == "coalesce") {
      for (auto& v : args) {
        if (!v.is_null()) return std::move(v);
      }
      return Value();
    }
    throw Error(ErrorCode::InvalidScript, "unknown operator '" + op + "'", e.offset);
  }

  Value random(const Expr& e) {
    const Expr* unit_expr = e.kwarg("unit");
    if (unit_expr == nullptr) {
      throw Error(ErrorCode::InvalidScript, "random op missing unit", e.offset);
    }
    std::string salt;
    if (const Expr* salt_expr = e.kwarg("salt")) {
      Value s = eval(*salt_expr);
      if (!s.is_string()) type_error("salt must be a string", *salt_expr);
      salt = s.as_string();
    } else if (target_ != nullptr) {
      salt = *target_;
    } else {
      throw Error(ErrorCode::InvalidScript,
                  "random operator outside an assignment needs an explicit salt", e.offset);
    }

    Value unit = eval(*unit_expr);
    Value::List units = unit.is_list() ? unit.as_list() : Value::List{unit};

    Value::Map args;
    for (const auto& [key, value] : e.kwargs) {
      if (key == "unit" || key == "salt") continue;
      args.emplace(key, eval(value));
    }
    SaltContext op_ctx = ctx_.with_parameter(std::move(salt));
    try {
      return call_random_operator(e.name, RandomOpCall{op_ctx, units, args});
    } catch (const Error& err) {
      if (err.offset()) throw;
      throw Error(err.code(), err.what(), e.offset);
    }
  }

  const Inputs& inputs_;
  const Overrides& overrides_;
  const SaltContext& ctx_;
  Assignment::Params params_;
  std::unordered_map<std::string, std::size_t> index_;
  const std::string* target_ = nullptr;
};

}  // namespace

Assignment evaluate(const ScriptIR& ir, const Inputs& inputs, const Overrides& overrides,
                    const SaltContext& ctx) {
  return Evaluator(inputs, overrides, ctx).run(ir);
}

}  // namespace planout
