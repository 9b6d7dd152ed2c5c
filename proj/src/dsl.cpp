#include "planout/dsl.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "planout/error.hpp"

namespace planout {

namespace {

const std::set<std::string, std::less<>> kKeywords = {"if",   "else", "return", "true", "false",
                                                       "null", "and",  "or",     "not"};

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = src.size();
  while (true) {
    while (i < n) {
      if (std::isspace(static_cast<unsigned char>(src[i]))) {
        ++i;
      } else if (src[i] == '#') {
        while (i < n && src[i] != '\n') ++i;
      } else {
        break;
      }
    }
    if (i >= n) break;

    const std::size_t start = i;
    const char c = src[i];
    if (is_ident_start(c)) {
      while (i < n && is_ident_char(src[i])) ++i;
      std::string word(src.substr(start, i - start));
      auto kind = kKeywords.count(word) ? TokenKind::Keyword : TokenKind::Identifier;
      tokens.push_back({kind, std::move(word), start});
    } else if (is_digit(c)) {
      while (i < n && is_digit(src[i])) ++i;
      if (i + 1 < n && src[i] == '.' && is_digit(src[i + 1])) {
        ++i;
        while (i < n && is_digit(src[i])) ++i;
      }
      if (i < n && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < n && (src[j] == '+' || src[j] == '-')) ++j;
        if (j < n && is_digit(src[j])) {
          i = j;
          while (i < n && is_digit(src[i])) ++i;
        }
      }
      tokens.push_back({TokenKind::Number, std::string(src.substr(start, i - start)), start});
    } else if (c == '\'' || c == '"') {
      ++i;
      std::string text;
      bool closed = false;
      while (i < n) {
        char ch = src[i];
        if (ch == c) {
          closed = true;
          ++i;
          break;
        }
        if (ch == '\\') {
          if (i + 1 >= n) break;
          char esc = src[i + 1];
          switch (esc) {
            case 'n': text += '\n'; break;
            case 't': text += '\t'; break;
            case 'r': text += '\r'; break;
            case '\\': text += '\\'; break;
            case '\'': text += '\''; break;
            case '"': text += '"'; break;
            default:
              throw Error(ErrorCode::ParseError,
                          std::string("unknown escape sequence '\\") + esc + "'", i);
          }
          i += 2;
          continue;
        }
        text += ch;
        ++i;
      }
      if (!closed) throw Error(ErrorCode::ParseError, "unterminated string literal", start);
      tokens.push_back({TokenKind::String, std::move(text), start});
    } else {
      static constexpr std::array<std::string_view, 6> kTwoChar = {"==", "!=", "<=", ">=", "&&", "||"};
      std::string_view two = src.substr(i, 2);
      bool matched = false;
      for (auto op : kTwoChar) {
        if (two == op) {
          tokens.push_back({TokenKind::Punctuation, std::string(op), start});
          i += 2;
          matched = true;
          break;
        }
      }
      if (!matched) {
        static constexpr std::string_view kSingle = "()[]{},;=+-*/%<>!";
        if (kSingle.find(c) == std::string_view::npos) {
          throw Error(ErrorCode::ParseError, std::string("unexpected character '") + c + "'", start);
        }
        tokens.push_back({TokenKind::Punctuation, std::string(1, c), start});
        ++i;
      }
    }
  }
  tokens.push_back({TokenKind::End, "", n});
  return tokens;
}

namespace {

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  ScriptIR parse_script() {
    ScriptIR ir;
    while (!at_end()) ir.statements.push_back(statement());
    return ir;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t idx = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[idx];
  }
  bool at_end() const { return peek().kind == TokenKind::End; }

  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    const auto& t = peek(ahead);
    return t.kind == TokenKind::Punctuation && t.lexeme == p;
  }
  bool is_keyword(std::string_view k) const {
    return peek().kind == TokenKind::Keyword && peek().lexeme == k;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw Error(ErrorCode::ParseError, message, peek().offset);
  }

  static std::string describe(const Token& t) {
    if (t.kind == TokenKind::End) return "end of input";
    if (t.kind == TokenKind::String) return "string literal";
    return "'" + t.lexeme + "'";
  }

  const Token& expect_punct(std::string_view p) {
    if (!is_punct(p)) fail("expected '" + std::string(p) + "' but found " + describe(peek()));
    return tokens_[pos_++];
  }

  std::vector<Stmt> block() {
    expect_punct("{");
    std::vector<Stmt> body;
    while (!is_punct("}")) {
      if (at_end()) fail("expected '}' but found end of input");
      body.push_back(statement());
    }
    ++pos_;
    return body;
  }

  Stmt statement() {
    const Token& t = peek();
    if (is_keyword("if")) return if_statement();
    if (is_keyword("return")) {
      ++pos_;
      Expr value = expression();
      expect_punct(";");
      return Stmt::make_return(std::move(value), t.offset);
    }
    if (is_punct("{")) return Stmt::make_block(block(), t.offset);
    if (t.kind == TokenKind::Identifier) {
      std::string target = t.lexeme;
      ++pos_;
      expect_punct("=");
      Expr value = expression();
      expect_punct(";");
      return Stmt::make_assign(std::move(target), std::move(value), t.offset);
    }
    fail("expected a statement but found " + describe(t));
  }

  Stmt if_statement() {
    const std::size_t offset = peek().offset;
    std::vector<Branch> branches;
    std::optional<std::vector<Stmt>> else_body;
    while (true) {
      ++pos_;  // 'if'
      expect_punct("(");
      Expr cond = expression();
      expect_punct(")");
      branches.push_back(Branch{std::move(cond), block()});
      if (!is_keyword("else")) break;
      ++pos_;
      if (is_keyword("if")) continue;
      else_body = block();
      break;
    }
    return Stmt::make_if(std::move(branches), std::move(else_body), offset);
  }

  Expr expression() { return or_expr(); }

  Expr nary(std::string op, std::string_view sym, std::string_view word, Expr (Parser::*next)()) {
    std::size_t offset = peek().offset;
    Expr first = (this->*next)();
    std::vector<Expr> operands;
    while (is_punct(sym) || (peek().kind == TokenKind::Keyword && peek().lexeme == word)) {
      if (operands.empty()) operands.push_back(std::move(first));
      ++pos_;
      operands.push_back((this->*next)());
    }
    if (operands.empty()) return first;
    return Expr::make_builtin(std::move(op), std::move(operands), offset);
  }

  Expr or_expr() { return nary("or", "||", "or", &Parser::and_expr); }
  Expr and_expr() { return nary("and", "&&", "and", &Parser::comparison); }

  Expr comparison() {
    static const std::array<std::pair<std::string_view, std::string_view>, 6> kOps = {
        {{"==", "eq"}, {"!=", "ne"}, {"<=", "le"}, {">=", "ge"}, {"<", "lt"}, {">", "gt"}}};
    std::size_t offset = peek().offset;
    Expr left = additive();
    while (true) {
      const std::string_view* name = nullptr;
      for (const auto& [sym, op] : kOps) {
        if (is_punct(sym)) name = &op;
      }
      if (name == nullptr) return left;
      ++pos_;
      Expr right = additive();
      left = Expr::make_builtin(std::string(*name), {std::move(left), std::move(right)}, offset);
    }
  }

  Expr additive() {
    std::size_t offset = peek().offset;
    Expr left = multiplicative();
    while (is_punct("+") || is_punct("-")) {
      std::string op = peek().lexeme == "+" ? "add" : "sub";
      ++pos_;
      Expr right = multiplicative();
      left = Expr::make_builtin(std::move(op), {std::move(left), std::move(right)}, offset);
    }
    return left;
  }

  Expr multiplicative() {
    std::size_t offset = peek().offset;
    Expr left = unary();
    while (is_punct("*") || is_punct("/") || is_punct("%")) {
      const auto& lex = peek().lexeme;
      std::string op = lex == "*" ? "mul" : lex == "/" ? "div" : "mod";
      ++pos_;
      Expr right = unary();
      left = Expr::make_builtin(std::move(op), {std::move(left), std::move(right)}, offset);
    }
    return left;
  }

  Expr unary() {
    const Token& t = peek();
    if (is_punct("!") || is_keyword("not")) {
      ++pos_;
      return Expr::make_builtin("not", {unary()}, t.offset);
    }
    if (is_punct("-")) {
      ++pos_;
      if (peek().kind == TokenKind::Number) {
        const Token& num = tokens_[pos_++];
        return postfix(number_literal("-" + num.lexeme, t.offset));
      }
      return Expr::make_builtin("neg", {unary()}, t.offset);
    }
    return postfix(primary());
  }

  Expr postfix(Expr base) {
    while (is_punct("[")) {
      std::size_t offset = peek().offset;
      ++pos_;
      Expr index = expression();
      expect_punct("]");
      base = Expr::make_index(std::move(base), std::move(index), offset);
    }
    return base;
  }

  Expr number_literal(const std::string& text, std::size_t offset) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    bool is_float = text.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      std::int64_t v = 0;
      auto [end, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || end != last) {
        throw Error(ErrorCode::ParseError, "integer literal " + text + " out of range", offset);
      }
      return Expr::make_literal(Value(v), offset);
    }
    double d = 0;
    auto [end, ec] = std::from_chars(first, last, d);
    if (ec != std::errc() || end != last || !std::isfinite(d)) {
      throw Error(ErrorCode::ParseError, "float literal " + text + " out of range", offset);
    }
    return Expr::make_literal(Value(d), offset);
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Number:
        ++pos_;
        return number_literal(t.lexeme, t.offset);
      case TokenKind::String:
        ++pos_;
        return Expr::make_literal(Value(t.lexeme), t.offset);
      case TokenKind::Keyword:
        if (t.lexeme == "true" || t.lexeme == "false") {
          ++pos_;
          return Expr::make_literal(Value(t.lexeme == "true"), t.offset);
        }
        if (t.lexeme == "null") {
          ++pos_;
          return Expr::make_literal(Value(), t.offset);
        }
        break;
      case TokenKind::Identifier:
        ++pos_;
        if (is_punct("(")) return call(t);
        return Expr::make_variable(t.lexeme, t.offset);
      case TokenKind::Punctuation:
        if (t.lexeme == "(") {
          ++pos_;
          Expr inner = expression();
          expect_punct(")");
          return inner;
        }
        if (t.lexeme == "[") {
          ++pos_;
          std::vector<Expr> items;
          if (!is_punct("]")) {
            items.push_back(expression());
            while (is_punct(",")) {
              ++pos_;
              items.push_back(expression());
            }
          }
          expect_punct("]");
          return Expr::make_array(std::move(items), t.offset);
        }
        break;
      case TokenKind::End:
        break;
    }
    fail("expected an expression but found " + describe(t));
  }

  Expr call(const Token& name) {
    expect_punct("(");
    const OperatorInfo* info = find_operator(name.lexeme);
    bool keyword_call = peek().kind == TokenKind::Identifier && is_punct("=", 1);
    if (is_punct(")")) keyword_call = info != nullptr && info->cls == OperatorClass::Random;

    if (keyword_call) {
      if (info != nullptr && info->cls == OperatorClass::Builtin) {
        fail("operator '" + name.lexeme + "' takes positional arguments");
      }
      std::map<std::string, Expr, std::less<>> kwargs;
      while (!is_punct(")")) {
        const Token& key = peek();
        if (key.kind != TokenKind::Identifier || !is_punct("=", 1)) {
          fail("expected a keyword argument 'name=value' but found " + describe(key));
        }
        pos_ += 2;
        Expr value = expression();
        if (!kwargs.emplace(key.lexeme, std::move(value)).second) {
          throw Error(ErrorCode::ParseError, "duplicate argument '" + key.lexeme + "'", key.offset);
        }
        if (!is_punct(",")) break;
        ++pos_;
      }
      expect_punct(")");
      return Expr::make_random(name.lexeme, std::move(kwargs), name.offset);
    }

    if (info != nullptr && info->cls == OperatorClass::Random) {
      fail("operator '" + name.lexeme + "' takes keyword arguments only (name=value)");
    }
    std::vector<Expr> args;
    if (!is_punct(")")) {
      args.push_back(expression());
      while (is_punct(",")) {
        ++pos_;
        if (peek().kind == TokenKind::Identifier && is_punct("=", 1)) {
          fail("cannot mix positional and keyword arguments");
        }
        args.push_back(expression());
      }
    }
    expect_punct(")");
    return Expr::make_builtin(name.lexeme, std::move(args), name.offset);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

std::variant<ScriptIR, std::vector<Diagnostic>> parse(std::string_view source) {
  try {
    Parser parser(tokenize(source));
    return parser.parse_script();
  } catch (const Error& e) {
    return std::vector<Diagnostic>{{Diagnostic::Severity::Error, e.what(), e.offset()}};
  }
}

ScriptIR parse_or_throw(std::string_view source) {
  auto result = parse(source);
  if (auto* diags = std::get_if<std::vector<Diagnostic>>(&result)) {
    const auto& d = diags->front();
    throw Error(ErrorCode::ParseError, d.message, d.offset);
  }
  return std::get<ScriptIR>(std::move(result));
}

// --- Decompiler -------------------------------------------------------------------

namespace {

constexpr int kPrecOr = 1;
constexpr int kPrecAnd = 2;
constexpr int kPrecCompare = 3;
constexpr int kPrecAdd = 4;
constexpr int kPrecMul = 5;
constexpr int kPrecUnary = 6;
constexpr int kPrecAtom = 7;

struct Printed {
  std::string text;
  int prec;
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string float_text(double d) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
  std::string s(buf.data(), end);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string literal_text(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Null: return "null";
    case Value::Kind::Bool: return v.as_bool() ? "true" : "false";
    case Value::Kind::Int: return std::to_string(v.as_int());
    case Value::Kind::Float: return float_text(v.as_float());
    case Value::Kind::String: return quote(v.as_string());
    case Value::Kind::List: {
      // Not reachable from parsed source; printed as an array expression.
      std::string out = "[";
      bool first = true;
      for (const auto& item : v.as_list()) {
        if (!first) out += ", ";
        first = false;
        out += literal_text(item);
      }
      return out + "]";
    }
    case Value::Kind::Map:
      return canonical_text(v);
  }
  return "null";
}

const std::map<std::string, std::pair<std::string, int>, std::less<>>& infix_ops() {
  static const std::map<std::string, std::pair<std::string, int>, std::less<>> ops = {
      {"or", {"||", kPrecOr}},     {"and", {"&&", kPrecAnd}},   {"eq", {"==", kPrecCompare}},
      {"ne", {"!=", kPrecCompare}}, {"lt", {"<", kPrecCompare}}, {"le", {"<=", kPrecCompare}},
      {"gt", {">", kPrecCompare}}, {"ge", {">=", kPrecCompare}}, {"add", {"+", kPrecAdd}},
      {"sub", {"-", kPrecAdd}},    {"mul", {"*", kPrecMul}},    {"div", {"/", kPrecMul}},
      {"mod", {"%", kPrecMul}}};
  return ops;
}

Printed print(const Expr& e);

std::string wrap(const Printed& p, int min_prec) {
  return p.prec < min_prec ? "(" + p.text + ")" : p.text;
}

std::string join_args(const std::vector<Expr>& args) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ", ";
    out += print(args[i]).text;
  }
  return out;
}

Printed print(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Literal: {
      std::string text = literal_text(e.literal);
      bool negative = !text.empty() && text[0] == '-';
      return {text, negative ? kPrecUnary : kPrecAtom};
    }
    case ExprKind::Variable:
      return {e.name, kPrecAtom};
    case ExprKind::Array:
      return {"[" + join_args(e.args) + "]", kPrecAtom};
    case ExprKind::Index: {
      Printed base = print(e.args[0]);
      // A negative literal base would otherwise absorb the sign differently.
      std::string base_text = base.prec < kPrecAtom ? "(" + base.text + ")" : base.text;
      return {base_text + "[" + print(e.args[1]).text + "]", kPrecAtom};
    }
    case ExprKind::Builtin: {
      const auto& ops = infix_ops();
      auto it = ops.find(e.name);
      bool nary = e.name == "and" || e.name == "or";
      if (it != ops.end() && (nary ? e.args.size() >= 2 : e.args.size() == 2)) {
        const auto& [sym, prec] = it->second;
        std::string out;
        for (std::size_t i = 0; i < e.args.size(); ++i) {
          int need = (i == 0 && !nary) ? prec : prec + 1;
          if (i) out += " " + sym + " ";
          out += wrap(print(e.args[i]), need);
        }
        return {out, prec};
      }
      if ((e.name == "not" || e.name == "neg") && e.args.size() == 1) {
        Printed operand = print(e.args[0]);
        std::string text = wrap(operand, kPrecUnary);
        if (e.name == "neg" && !text.empty() &&
            (std::isdigit(static_cast<unsigned char>(text[0])) || text[0] == '-')) {
          text = "(" + text + ")";
        }
        return {(e.name == "not" ? "!" : "-") + text, kPrecUnary};
      }
      return {e.name + "(" + join_args(e.args) + ")", kPrecAtom};
    }
    case ExprKind::Random: {
      std::string out = e.name + "(";
      bool first = true;
      for (const auto& [key, value] : e.kwargs) {
        if (!first) out += ", ";
        first = false;
        out += key + "=" + print(value).text;
      }
      return {out + ")", kPrecAtom};
    }
  }
  return {"null", kPrecAtom};
}

void print_block(const std::vector<Stmt>& stmts, int depth, std::string& out);

void print_stmt(const Stmt& s, int depth, std::string& out) {
  std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  switch (s.kind) {
    case StmtKind::Assign:
      out += indent + s.target + " = " + print(s.value).text + ";\n";
      break;
    case StmtKind::Return:
      out += indent + "return " + print(s.value).text + ";\n";
      break;
    case StmtKind::Block:
      out += indent + "{\n";
      print_block(s.body, depth + 1, out);
      out += indent + "}\n";
      break;
    case StmtKind::If:
      for (std::size_t i = 0; i < s.branches.size(); ++i) {
        out += i == 0 ? indent + "if (" : " else if (";
        out += print(s.branches[i].condition).text + ") {\n";
        print_block(s.branches[i].body, depth + 1, out);
        out += indent + "}";
      }
      if (s.else_body) {
        out += " else {\n";
        print_block(*s.else_body, depth + 1, out);
        out += indent + "}";
      }
      out += "\n";
      break;
  }
}

void print_block(const std::vector<Stmt>& stmts, int depth, std::string& out) {
  for (const auto& s : stmts) print_stmt(s, depth, out);
}

}  // namespace

std::string decompile(const ScriptIR& ir) {
  std::string out;
  print_block(ir.statements, 0, out);
  return out;
}

}  // namespace planout
