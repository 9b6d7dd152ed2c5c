#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "planout/ir.hpp"

namespace planout {

enum class TokenKind { Identifier, Number, String, Punctuation, Keyword, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string lexeme;
  std::size_t offset = 0;
};

/// Splits DSL source into tokens, ending with a single End token. String
/// tokens carry their decoded contents. Throws ParseError on an unterminated
/// string or a stray character.
std::vector<Token> tokenize(std::string_view source);

/// Parses DSL source. On a syntax error returns diagnostics (the first one at
/// the offending token) and no IR.
std::variant<ScriptIR, std::vector<Diagnostic>> parse(std::string_view source);

/// Like parse() but throws ParseError carrying the first diagnostic.
ScriptIR parse_or_throw(std::string_view source);

/// Pretty-prints IR as DSL source; parse(decompile(ir)) == ir.
std::string decompile(const ScriptIR& ir);

}  // namespace planout
