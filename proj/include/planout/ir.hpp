#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "planout/value.hpp"

namespace planout {

inline constexpr std::string_view kFormatVersion = "1";

struct Diagnostic {
  enum class Severity { Error, Warning };

  Severity severity = Severity::Error;
  std::string message;
  std::optional<std::size_t> offset;

  bool is_error() const noexcept { return severity == Severity::Error; }
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

bool has_errors(const std::vector<Diagnostic>& diagnostics);
std::string format_diagnostic(const Diagnostic& d);

enum class ExprKind { Literal, Variable, Array, Index, Builtin, Random };

/// Expression node.
///
///  Literal   `literal` holds the value.
///  Variable  `name` is the referenced variable.
///  Array     `args` are the element expressions.
///  Index     `args` is {base, index}.
///  Builtin   `name` is the operator ("add", "eq", "length", ...), `args` the operands.
///  Random    `name` is the random operator, `kwargs` its named arguments.
///
/// `offset` is the source position when the node came from the DSL; it does
/// not take part in equality or serialization.
struct Expr {
  ExprKind kind = ExprKind::Literal;
  std::string name;
  Value literal;
  std::vector<Expr> args;
  std::map<std::string, Expr, std::less<>> kwargs;
  std::optional<std::size_t> offset;

  static Expr make_literal(Value v, std::optional<std::size_t> offset = std::nullopt);
  static Expr make_variable(std::string name, std::optional<std::size_t> offset = std::nullopt);
  static Expr make_array(std::vector<Expr> items, std::optional<std::size_t> offset = std::nullopt);
  static Expr make_index(Expr base, Expr index, std::optional<std::size_t> offset = std::nullopt);
  static Expr make_builtin(std::string op, std::vector<Expr> operands,
                           std::optional<std::size_t> offset = std::nullopt);
  static Expr make_random(std::string op, std::map<std::string, Expr, std::less<>> kwargs,
                          std::optional<std::size_t> offset = std::nullopt);

  const Expr* kwarg(std::string_view key) const;

  friend bool operator==(const Expr& a, const Expr& b);
};

enum class StmtKind { Assign, If, Block, Return };

struct Stmt;

struct Branch {
  Expr condition;
  std::vector<Stmt> body;
  friend bool operator==(const Branch&, const Branch&);
};

/// Statement node.
///
///  Assign  `target = value`.
///  If      `branches` in order (if, else if...), optional `else_body`.
///  Block   `body`.
///  Return  `value`; stops evaluation. A falsy value marks the unit as not
///          participating, so no exposure is logged for it.
struct Stmt {
  StmtKind kind = StmtKind::Assign;
  std::string target;
  Expr value;
  std::vector<Branch> branches;
  std::optional<std::vector<Stmt>> else_body;
  std::vector<Stmt> body;
  std::optional<std::size_t> offset;

  static Stmt make_assign(std::string target, Expr value,
                          std::optional<std::size_t> offset = std::nullopt);
  static Stmt make_if(std::vector<Branch> branches, std::optional<std::vector<Stmt>> else_body,
                      std::optional<std::size_t> offset = std::nullopt);
  static Stmt make_block(std::vector<Stmt> body, std::optional<std::size_t> offset = std::nullopt);
  static Stmt make_return(Expr value, std::optional<std::size_t> offset = std::nullopt);

  friend bool operator==(const Stmt& a, const Stmt& b);
};

/// A whole script. Immutable once built; safe to share between threads.
struct ScriptIR {
  std::vector<Stmt> statements;
  std::string format_version{kFormatVersion};

  friend bool operator==(const ScriptIR& a, const ScriptIR& b);
};

// --- Operator registry --------------------------------------------------------

enum class OperatorClass { Builtin, Random };

struct OperatorInfo {
  std::string name;
  OperatorClass cls = OperatorClass::Builtin;
  /// Builtins: accepted operand counts; max < 0 means unbounded.
  int min_args = 0;
  int max_args = 0;
  /// Random operators: required and optional keyword arguments, excluding
  /// the implicit `unit` (required) and `salt` (optional).
  std::vector<std::string> required_kwargs;
  std::vector<std::string> optional_kwargs;
};

/// Looks up a registered operator, builtin or random. Returns nullptr if the
/// name is not registered.
const OperatorInfo* find_operator(std::string_view name);

/// Names of all registered operators, sorted.
std::vector<std::string> operator_names();

/// Makes a custom random operator known to validation and deserialization.
/// The evaluator looks up its implementation in the random-op plug-in table
/// (see random_ops.hpp).
void register_operator_info(OperatorInfo info);

// --- Serialization and inspection ---------------------------------------------

/// Canonical text: compact JSON with sorted keys; equal IRs give equal bytes.
std::string serialize(const ScriptIR& ir);
nlohmann::json to_json(const ScriptIR& ir);

/// Throws ParseError (with byte offset) on malformed JSON, SchemaError on an
/// unknown node kind, unknown operator or missing/extra field.
ScriptIR deserialize(std::string_view text);
ScriptIR ir_from_json(const nlohmann::json& j);

/// Empty (no errors, no warnings) for a clean script. Warnings do not make a
/// script invalid; see has_errors().
std::vector<Diagnostic> validate(const ScriptIR& ir);

/// Assignment targets in first-assignment order.
std::vector<std::string> list_parameters(const ScriptIR& ir);

inline constexpr std::string_view kDynamicUnit = "<dynamic>";

/// For each parameter set by a random operator: the unit variable names, in
/// order of first appearance. Units that are not plain variable references
/// are reported as kDynamicUnit.
std::vector<std::pair<std::string, std::vector<std::string>>> list_units(const ScriptIR& ir);

/// Hex SHA-1 of serialize(ir); identifies the exact script behind a log record.
std::string script_digest(const ScriptIR& ir);

}  // namespace planout
