#include "planout/ir.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <set>
#include <shared_mutex>

#include "planout/error.hpp"
#include "planout/random_ops.hpp"

namespace planout {

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const Diagnostic& d) { return d.is_error(); });
}

std::string format_diagnostic(const Diagnostic& d) {
  std::string out = d.is_error() ? "error" : "warning";
  if (d.offset) out += " at offset " + std::to_string(*d.offset);
  out += ": ";
  out += d.message;
  return out;
}

// --- Node constructors and equality -------------------------------------------

Expr Expr::make_literal(Value v, std::optional<std::size_t> offset) {
  Expr e;
  e.kind = ExprKind::Literal;
  e.literal = std::move(v);
  e.offset = offset;
  return e;
}

Expr Expr::make_variable(std::string name, std::optional<std::size_t> offset) {
  Expr e;
  e.kind = ExprKind::Variable;
  e.name = std::move(name);
  e.offset = offset;
  return e;
}

Expr Expr::make_array(std::vector<Expr> items, std::optional<std::size_t> offset) {
  Expr e;
  e.kind = ExprKind::Array;
  e.args = std::move(items);
  e.offset = offset;
  return e;
}

Expr Expr::make_index(Expr base, Expr index, std::optional<std::size_t> offset) {
  Expr e;
  e.kind = ExprKind::Index;
  e.args.push_back(std::move(base));
  e.args.push_back(std::move(index));
  e.offset = offset;
  return e;
}

Expr Expr::make_builtin(std::string op, std::vector<Expr> operands,
                        std::optional<std::size_t> offset) {
  Expr e;
  e.kind = ExprKind::Builtin;
  e.name = std::move(op);
  e.args = std::move(operands);
  e.offset = offset;
  return e;
}

Expr Expr::make_random(std::string op, std::map<std::string, Expr, std::less<>> kwargs,
                       std::optional<std::size_t> offset) {
  Expr e;
  e.kind = ExprKind::Random;
  e.name = std::move(op);
  e.kwargs = std::move(kwargs);
  e.offset = offset;
  return e;
}

const Expr* Expr::kwarg(std::string_view key) const {
  auto it = kwargs.find(key);
  return it == kwargs.end() ? nullptr : &it->second;
}

bool operator==(const Expr& a, const Expr& b) {
  return a.kind == b.kind && a.name == b.name && a.literal == b.literal && a.args == b.args &&
         a.kwargs == b.kwargs;
}

bool operator==(const Branch& a, const Branch& b) {
  return a.condition == b.condition && a.body == b.body;
}

Stmt Stmt::make_assign(std::string target, Expr value, std::optional<std::size_t> offset) {
  Stmt s;
  s.kind = StmtKind::Assign;
  s.target = std::move(target);
  s.value = std::move(value);
  s.offset = offset;
  return s;
}

Stmt Stmt::make_if(std::vector<Branch> branches, std::optional<std::vector<Stmt>> else_body,
                   std::optional<std::size_t> offset) {
  Stmt s;
  s.kind = StmtKind::If;
  s.branches = std::move(branches);
  s.else_body = std::move(else_body);
  s.offset = offset;
  return s;
}

Stmt Stmt::make_block(std::vector<Stmt> body, std::optional<std::size_t> offset) {
  Stmt s;
  s.kind = StmtKind::Block;
  s.body = std::move(body);
  s.offset = offset;
  return s;
}

Stmt Stmt::make_return(Expr value, std::optional<std::size_t> offset) {
  Stmt s;
  s.kind = StmtKind::Return;
  s.value = std::move(value);
  s.offset = offset;
  return s;
}

bool operator==(const Stmt& a, const Stmt& b) {
  return a.kind == b.kind && a.target == b.target && a.value == b.value &&
         a.branches == b.branches && a.else_body == b.else_body && a.body == b.body;
}

bool operator==(const ScriptIR& a, const ScriptIR& b) {
  return a.format_version == b.format_version && a.statements == b.statements;
}

// --- Registry -----------------------------------------------------------------

namespace {

struct Registry {
  std::shared_mutex mutex;
  std::map<std::string, OperatorInfo, std::less<>> ops;

  Registry() {
    auto builtin = [this](std::string name, int min_args, int max_args) {
      OperatorInfo info;
      info.name = name;
      info.cls = OperatorClass::Builtin;
      info.min_args = min_args;
      info.max_args = max_args;
      ops.emplace(std::move(name), std::move(info));
    };
    auto random = [this](std::string name, std::vector<std::string> required,
                         std::vector<std::string> optional = {}) {
      OperatorInfo info;
      info.name = name;
      info.cls = OperatorClass::Random;
      info.required_kwargs = std::move(required);
      info.optional_kwargs = std::move(optional);
      ops.emplace(std::move(name), std::move(info));
    };
    for (const char* op : {"add", "sub", "mul", "div", "mod", "eq", "ne", "lt", "le", "gt", "ge"}) {
      builtin(op, 2, 2);
    }
    builtin("neg", 1, 1);
    builtin("not", 1, 1);
    builtin("and", 2, -1);
    builtin("or", 2, -1);
    builtin("length", 1, 1);
    builtin("min", 1, -1);
    builtin("max", 1, -1);
    builtin("round", 1, 1);
    builtin("coalesce", 1, -1);

    random("uniformChoice", {"choices"});
    random("weightedChoice", {"choices", "weights"});
    random("bernoulliTrial", {"p"});
    random("randomInteger", {"min", "max"});
    random("randomFloat", {"min", "max"});
    random("sample", {"choices"}, {"draws"});
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

const OperatorInfo* find_operator(std::string_view name) {
  auto& r = registry();
  std::shared_lock lock(r.mutex);
  auto it = r.ops.find(name);
  // Entries are never erased, so the pointer outlives the lock.
  return it == r.ops.end() ? nullptr : &it->second;
}

std::vector<std::string> operator_names() {
  auto& r = registry();
  std::shared_lock lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, info] : r.ops) names.push_back(name);
  return names;
}

void register_operator_info(OperatorInfo info) {
  auto& r = registry();
  for (std::string_view reserved : {"literal", "get", "array", "index", "set", "if", "block", "return"}) {
    if (info.name == reserved) {
      throw Error(ErrorCode::InvalidArgument, "operator name '" + info.name + "' is reserved");
    }
  }
  std::unique_lock lock(r.mutex);
  if (r.ops.count(info.name) != 0) {
    throw Error(ErrorCode::InvalidArgument, "operator '" + info.name + "' is already registered");
  }
  std::string name = info.name;
  r.ops.emplace(std::move(name), std::move(info));
}

// --- Serialization --------------------------------------------------------------

namespace {

using nlohmann::json;

json expr_to_json(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Literal:
      return json{{"op", "literal"}, {"value", to_json(e.literal)}};
    case ExprKind::Variable:
      return json{{"op", "get"}, {"var", e.name}};
    case ExprKind::Array: {
      json values = json::array();
      for (const auto& item : e.args) values.push_back(expr_to_json(item));
      return json{{"op", "array"}, {"values", std::move(values)}};
    }
    case ExprKind::Index:
      return json{{"op", "index"}, {"base", expr_to_json(e.args[0])},
                  {"index", expr_to_json(e.args[1])}};
    case ExprKind::Builtin: {
      json args = json::array();
      for (const auto& item : e.args) args.push_back(expr_to_json(item));
      return json{{"op", e.name}, {"args", std::move(args)}};
    }
    case ExprKind::Random: {
      json kwargs = json::object();
      for (const auto& [k, v] : e.kwargs) kwargs[k] = expr_to_json(v);
      return json{{"op", e.name}, {"kwargs", std::move(kwargs)}};
    }
  }
  return nullptr;
}

json stmts_to_json(const std::vector<Stmt>& stmts);

json stmt_to_json(const Stmt& s) {
  switch (s.kind) {
    case StmtKind::Assign:
      return json{{"op", "set"}, {"var", s.target}, {"value", expr_to_json(s.value)}};
    case StmtKind::If: {
      json branches = json::array();
      for (const auto& b : s.branches) {
        branches.push_back(json{{"cond", expr_to_json(b.condition)}, {"then", stmts_to_json(b.body)}});
      }
      json out{{"op", "if"}, {"branches", std::move(branches)}};
      if (s.else_body) out["else"] = stmts_to_json(*s.else_body);
      return out;
    }
    case StmtKind::Block:
      return json{{"op", "block"}, {"body", stmts_to_json(s.body)}};
    case StmtKind::Return:
      return json{{"op", "return"}, {"value", expr_to_json(s.value)}};
  }
  return nullptr;
}

json stmts_to_json(const std::vector<Stmt>& stmts) {
  json arr = json::array();
  for (const auto& s : stmts) arr.push_back(stmt_to_json(s));
  return arr;
}

[[noreturn]] void schema_error(const std::string& message) {
  throw Error(ErrorCode::SchemaError, message);
}

const json& require_object(const json& j, std::string_view what) {
  if (!j.is_object()) schema_error(std::string(what) + " must be an object");
  return j;
}

void require_keys(const json& j, std::string_view node, std::initializer_list<std::string_view> keys,
                  std::initializer_list<std::string_view> optional = {}) {
  for (auto key : keys) {
    if (!j.contains(key)) {
      schema_error("node '" + std::string(node) + "' is missing field '" + std::string(key) + "'");
    }
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    bool known = std::find(keys.begin(), keys.end(), k) != keys.end() ||
                 std::find(optional.begin(), optional.end(), k) != optional.end();
    if (!known) schema_error("node '" + std::string(node) + "' has unexpected field '" + k + "'");
  }
}

const std::string& require_string(const json& j, std::string_view node, std::string_view key) {
  const auto& v = j.at(std::string(key));
  if (!v.is_string()) {
    schema_error("field '" + std::string(key) + "' of node '" + std::string(node) +
                 "' must be a string");
  }
  return v.get_ref<const std::string&>();
}

const json& require_array(const json& j, std::string_view node, std::string_view key) {
  const auto& v = j.at(std::string(key));
  if (!v.is_array()) {
    schema_error("field '" + std::string(key) + "' of node '" + std::string(node) +
                 "' must be an array");
  }
  return v;
}

Expr expr_from_json(const json& j) {
  require_object(j, "expression");
  if (!j.contains("op") || !j["op"].is_string()) schema_error("expression node without 'op'");
  const auto& op = j["op"].get_ref<const std::string&>();

  if (op == "literal") {
    require_keys(j, op, {"op", "value"});
    return Expr::make_literal(from_json(j["value"]));
  }
  if (op == "get") {
    require_keys(j, op, {"op", "var"});
    return Expr::make_variable(require_string(j, op, "var"));
  }
  if (op == "array") {
    require_keys(j, op, {"op", "values"});
    std::vector<Expr> items;
    for (const auto& item : require_array(j, op, "values")) items.push_back(expr_from_json(item));
    return Expr::make_array(std::move(items));
  }
  if (op == "index") {
    require_keys(j, op, {"op", "base", "index"});
    return Expr::make_index(expr_from_json(j["base"]), expr_from_json(j["index"]));
  }

  const OperatorInfo* info = find_operator(op);
  if (info == nullptr) schema_error("unknown node kind '" + op + "'");
  if (info->cls == OperatorClass::Builtin) {
    require_keys(j, op, {"op", "args"});
    std::vector<Expr> args;
    for (const auto& item : require_array(j, op, "args")) args.push_back(expr_from_json(item));
    return Expr::make_builtin(op, std::move(args));
  }
  require_keys(j, op, {"op", "kwargs"});
  const auto& kw = j["kwargs"];
  if (!kw.is_object()) schema_error("field 'kwargs' of node '" + op + "' must be an object");
  std::map<std::string, Expr, std::less<>> kwargs;
  for (auto it = kw.begin(); it != kw.end(); ++it) kwargs.emplace(it.key(), expr_from_json(it.value()));
  return Expr::make_random(op, std::move(kwargs));
}

std::vector<Stmt> stmts_from_json(const json& j, std::string_view what) {
  if (!j.is_array()) schema_error(std::string(what) + " must be an array of statements");
  std::vector<Stmt> out;
  out.reserve(j.size());
  for (const auto& item : j) {
    require_object(item, "statement");
    if (!item.contains("op") || !item["op"].is_string()) schema_error("statement node without 'op'");
    const auto& op = item["op"].get_ref<const std::string&>();
    if (op == "set") {
      require_keys(item, op, {"op", "var", "value"});
      out.push_back(Stmt::make_assign(require_string(item, op, "var"), expr_from_json(item["value"])));
    } else if (op == "if") {
      require_keys(item, op, {"op", "branches"}, {"else"});
      std::vector<Branch> branches;
      for (const auto& b : require_array(item, op, "branches")) {
        require_object(b, "branch");
        require_keys(b, "branch", {"cond", "then"});
        branches.push_back(Branch{expr_from_json(b["cond"]), stmts_from_json(b["then"], "then")});
      }
      if (branches.empty()) schema_error("node 'if' needs at least one branch");
      std::optional<std::vector<Stmt>> else_body;
      if (item.contains("else")) else_body = stmts_from_json(item["else"], "else");
      out.push_back(Stmt::make_if(std::move(branches), std::move(else_body)));
    } else if (op == "block") {
      require_keys(item, op, {"op", "body"});
      out.push_back(Stmt::make_block(stmts_from_json(item["body"], "body")));
    } else if (op == "return") {
      require_keys(item, op, {"op", "value"});
      out.push_back(Stmt::make_return(expr_from_json(item["value"])));
    } else {
      schema_error("unknown statement kind '" + op + "'");
    }
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const ScriptIR& ir) {
  return json{{"format_version", ir.format_version}, {"statements", stmts_to_json(ir.statements)}};
}

std::string serialize(const ScriptIR& ir) { return to_json(ir).dump(); }

ScriptIR ir_from_json(const nlohmann::json& j) {
  require_object(j, "script");
  require_keys(j, "script", {"format_version", "statements"});
  ScriptIR ir;
  ir.format_version = require_string(j, "script", "format_version");
  if (ir.format_version != kFormatVersion) {
    schema_error("unsupported format_version '" + ir.format_version + "'");
  }
  ir.statements = stmts_from_json(j["statements"], "statements");
  return ir;
}

ScriptIR deserialize(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    throw Error(ErrorCode::ParseError, e.what(), offset);
  }
  return ir_from_json(j);
}

std::string script_digest(const ScriptIR& ir) { return sha1_hex(serialize(ir)); }

// --- Validation -----------------------------------------------------------------

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto head = static_cast<unsigned char>(s[0]);
  if (!(std::isalpha(head) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_';
  });
}

void collect_variables(const Expr& e, std::set<std::string, std::less<>>& out) {
  if (e.kind == ExprKind::Variable) out.insert(e.name);
  for (const auto& a : e.args) collect_variables(a, out);
  for (const auto& [k, v] : e.kwargs) collect_variables(v, out);
}

void collect_unit_inputs(const Expr& e, std::set<std::string, std::less<>>& out) {
  if (e.kind == ExprKind::Random) {
    if (const Expr* unit = e.kwarg("unit")) collect_variables(*unit, out);
  }
  for (const auto& a : e.args) collect_unit_inputs(a, out);
  for (const auto& [k, v] : e.kwargs) collect_unit_inputs(v, out);
}

void collect_unit_inputs(const std::vector<Stmt>& stmts, std::set<std::string, std::less<>>& out) {
  for (const auto& s : stmts) {
    collect_unit_inputs(s.value, out);
    for (const auto& b : s.branches) {
      collect_unit_inputs(b.condition, out);
      collect_unit_inputs(b.body, out);
    }
    if (s.else_body) collect_unit_inputs(*s.else_body, out);
    collect_unit_inputs(s.body, out);
  }
}

std::optional<std::size_t> literal_list_length(const Expr& e) {
  if (e.kind == ExprKind::Array) return e.args.size();
  if (e.kind == ExprKind::Literal && e.literal.is_list()) return e.literal.as_list().size();
  return std::nullopt;
}

class Validator {
 public:
  explicit Validator(const ScriptIR& ir) { collect_unit_inputs(ir.statements, declared_inputs_); }

  std::vector<Diagnostic> run(const ScriptIR& ir) {
    if (ir.format_version != kFormatVersion) {
      error("unsupported format_version '" + ir.format_version + "'", std::nullopt);
    }
    std::set<std::string, std::less<>> assigned;
    check_block(ir.statements, assigned);
    return std::move(diagnostics_);
  }

 private:
  using NameSet = std::set<std::string, std::less<>>;

  void error(std::string message, std::optional<std::size_t> offset) {
    diagnostics_.push_back({Diagnostic::Severity::Error, std::move(message), offset});
  }
  void warning(std::string message, std::optional<std::size_t> offset) {
    diagnostics_.push_back({Diagnostic::Severity::Warning, std::move(message), offset});
  }

  void check_block(const std::vector<Stmt>& stmts, NameSet& assigned) {
    for (const auto& s : stmts) check_stmt(s, assigned);
  }

  void check_stmt(const Stmt& s, NameSet& assigned) {
    switch (s.kind) {
      case StmtKind::Assign:
        if (!is_identifier(s.target)) {
          error("invalid assignment target '" + s.target + "'", s.offset);
        }
        target_ = s.target;
        check_expr(s.value, assigned);
        target_.reset();
        assigned.insert(s.target);
        break;
      case StmtKind::If: {
        std::optional<NameSet> definitely;
        for (const auto& b : s.branches) {
          check_expr(b.condition, assigned);
          NameSet inner = assigned;
          check_block(b.body, inner);
          intersect(definitely, inner);
        }
        if (s.branches.empty()) error("if statement without branches", s.offset);
        if (s.else_body) {
          NameSet inner = assigned;
          check_block(*s.else_body, inner);
          intersect(definitely, inner);
          if (definitely) assigned = std::move(*definitely);
        }
        break;
      }
      case StmtKind::Block:
        check_block(s.body, assigned);
        break;
      case StmtKind::Return:
        check_expr(s.value, assigned);
        break;
    }
  }

  static void intersect(std::optional<NameSet>& acc, const NameSet& next) {
    if (!acc) {
      acc = next;
      return;
    }
    NameSet out;
    std::set_intersection(acc->begin(), acc->end(), next.begin(), next.end(),
                          std::inserter(out, out.begin()));
    acc = std::move(out);
  }

  void check_expr(const Expr& e, const NameSet& assigned) {
    switch (e.kind) {
      case ExprKind::Literal:
        return;
      case ExprKind::Variable:
        if (assigned.count(e.name) == 0 && declared_inputs_.count(e.name) == 0 &&
            warned_.insert(e.name).second) {
          warning("possibly-unbound variable '" + e.name + "'", e.offset);
        }
        return;
      case ExprKind::Array:
        for (const auto& a : e.args) check_expr(a, assigned);
        return;
      case ExprKind::Index:
        if (e.args.size() != 2) error("index node needs a base and an index", e.offset);
        for (const auto& a : e.args) check_expr(a, assigned);
        return;
      case ExprKind::Builtin:
        check_builtin(e, assigned);
        return;
      case ExprKind::Random:
        check_random(e, assigned);
        return;
    }
  }

  void check_builtin(const Expr& e, const NameSet& assigned) {
    const OperatorInfo* info = find_operator(e.name);
    if (info == nullptr) {
      error("unknown operator '" + e.name + "'", e.offset);
    } else if (info->cls != OperatorClass::Builtin) {
      error("operator '" + e.name + "' takes keyword arguments only", e.offset);
    } else {
      auto n = static_cast<int>(e.args.size());
      if (n < info->min_args || (info->max_args >= 0 && n > info->max_args)) {
        std::string expected = std::to_string(info->min_args);
        if (info->max_args < 0) {
          expected = "at least " + expected;
        } else if (info->max_args != info->min_args) {
          expected += " to " + std::to_string(info->max_args);
        }
        error("operator '" + e.name + "' expects " + expected + " argument(s), got " +
                  std::to_string(n),
              e.offset);
      }
    }
    for (const auto& a : e.args) check_expr(a, assigned);
  }

  void check_random(const Expr& e, const NameSet& assigned) {
    const OperatorInfo* info = find_operator(e.name);
    if (info == nullptr) {
      error("unknown operator '" + e.name + "'", e.offset);
    } else if (info->cls != OperatorClass::Random) {
      error("operator '" + e.name + "' does not take keyword arguments", e.offset);
    } else {
      if (e.kwarg("unit") == nullptr) error("random op missing unit", e.offset);
      for (const auto& req : info->required_kwargs) {
        if (e.kwarg(req) == nullptr) {
          error("operator '" + e.name + "' is missing argument '" + req + "'", e.offset);
        }
      }
      for (const auto& [key, value] : e.kwargs) {
        bool known = key == "unit" || key == "salt" ||
                     std::count(info->required_kwargs.begin(), info->required_kwargs.end(), key) ||
                     std::count(info->optional_kwargs.begin(), info->optional_kwargs.end(), key);
        if (!known) {
          error("operator '" + e.name + "' has no argument '" + key + "'", value.offset);
        }
      }
      const Expr* salt = e.kwarg("salt");
      if (salt != nullptr) {
        if (salt->kind != ExprKind::Literal || !salt->literal.is_string() ||
            salt->literal.as_string().empty()) {
          error("salt must be a non-empty string literal", salt->offset);
        } else if (salt->literal.as_string().find('.') != std::string::npos) {
          error("salt must not contain '.'", salt->offset);
        }
      } else if (!target_) {
        error("random operator outside an assignment needs an explicit salt", e.offset);
      }
      if (e.name == "weightedChoice") {
        const Expr* choices = e.kwarg("choices");
        const Expr* weights = e.kwarg("weights");
        if (choices != nullptr && weights != nullptr) {
          auto nc = literal_list_length(*choices);
          auto nw = literal_list_length(*weights);
          if (nc && nw && *nc != *nw) {
            error("weightedChoice has " + std::to_string(*nc) + " choices but " +
                      std::to_string(*nw) + " weights",
                  e.offset);
          }
        }
      }
    }
    for (const auto& [key, value] : e.kwargs) check_expr(value, assigned);
  }

  NameSet declared_inputs_;
  NameSet warned_;
  std::optional<std::string> target_;
  std::vector<Diagnostic> diagnostics_;
};

void collect_parameters(const std::vector<Stmt>& stmts, std::vector<std::string>& out) {
  for (const auto& s : stmts) {
    switch (s.kind) {
      case StmtKind::Assign:
        if (std::find(out.begin(), out.end(), s.target) == out.end()) out.push_back(s.target);
        break;
      case StmtKind::If:
        for (const auto& b : s.branches) collect_parameters(b.body, out);
        if (s.else_body) collect_parameters(*s.else_body, out);
        break;
      case StmtKind::Block:
        collect_parameters(s.body, out);
        break;
      case StmtKind::Return:
        break;
    }
  }
}

void unit_names(const Expr& unit, std::vector<std::string>& out) {
  auto add = [&out](std::string name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
  };
  if (unit.kind == ExprKind::Variable) {
    add(unit.name);
  } else if (unit.kind == ExprKind::Array) {
    for (const auto& item : unit.args) {
      add(item.kind == ExprKind::Variable ? item.name : std::string(kDynamicUnit));
    }
  } else {
    add(std::string(kDynamicUnit));
  }
}

void random_units(const Expr& e, std::vector<std::string>& out, bool& found) {
  if (e.kind == ExprKind::Random) {
    found = true;
    if (const Expr* unit = e.kwarg("unit")) unit_names(*unit, out);
  }
  for (const auto& a : e.args) random_units(a, out, found);
  for (const auto& [k, v] : e.kwargs) random_units(v, out, found);
}

void collect_units(const std::vector<Stmt>& stmts,
                   std::vector<std::pair<std::string, std::vector<std::string>>>& out) {
  for (const auto& s : stmts) {
    switch (s.kind) {
      case StmtKind::Assign: {
        std::vector<std::string> names;
        bool found = false;
        random_units(s.value, names, found);
        if (!found) break;
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const auto& entry) { return entry.first == s.target; });
        if (it == out.end()) {
          out.emplace_back(s.target, std::move(names));
        } else {
          for (auto& n : names) {
            if (std::find(it->second.begin(), it->second.end(), n) == it->second.end()) {
              it->second.push_back(std::move(n));
            }
          }
        }
        break;
      }
      case StmtKind::If:
        for (const auto& b : s.branches) collect_units(b.body, out);
        if (s.else_body) collect_units(*s.else_body, out);
        break;
      case StmtKind::Block:
        collect_units(s.body, out);
        break;
      case StmtKind::Return:
        break;
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate(const ScriptIR& ir) { return Validator(ir).run(ir); }

std::vector<std::string> list_parameters(const ScriptIR& ir) {
  std::vector<std::string> out;
  collect_parameters(ir.statements, out);
  return out;
}

std::vector<std::pair<std::string, std::vector<std::string>>> list_units(const ScriptIR& ir) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  collect_units(ir.statements, out);
  return out;
}

}  // namespace planout
