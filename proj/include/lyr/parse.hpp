#pragma once

#include <memory>
#include <string>

#include "lyr/ast.hpp"
#include "lyr/program.hpp"

namespace lyr {

/// Parse failure with a line:column position in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Formula sublanguage.
//
//   formula := iff
//   iff     := implies ('<->' iff)?                  right-associative
//   implies := or ('->' implies)?                    right-associative
//   or      := and ('or' and)*                       left-associative
//   and     := unary ('and' unary)*                  left-associative
//   unary   := 'not' unary
//            | ('forall'|'exists') ident ':' formula   scope runs to the end
//            | '(' formula ')'
//            | atom
//   atom    := ident '(' term (',' term)* ')'
//   term    := ident ('(' term (',' term)* ')')?
//
// Precedence, tightest first: not, and, or, ->, <->.
std::unique_ptr<Formula> parse_formula(const std::string& text);

/// Parse a full program file (declaration stanzas plus constraints).
ProgramDecl parse_program(const std::string& text);

/// Convenience: read the file then parse_program.
ProgramDecl parse_program_file(const std::string& path);

}  // namespace lyr
