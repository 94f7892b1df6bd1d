#pragma once

#include <cstddef>
#include <string_view>

#include "safemon/stl/formula.hpp"

namespace safemon::stl {

/// Parses the textual STL grammar.
///
///   formula := disj
///   disj    := conj ('|' conj)*
///   conj    := until ('&' until)*
///   until   := unary ('U' '[' a ',' b ']' unary)*
///   unary   := '!' unary | 'G' '[' a ',' b ']' unary | 'F' '[' a ',' b ']' unary
///            | '(' formula ')' | expr ('>' | '<' | '>=' | '<=') expr
///   expr    := term (('+' | '-') term)*
///   term    := factor (('*' | '/') factor)*
///   factor  := '-' factor | number | 's' '[' i ']' | '(' expr ')'
///            | 'abs' '(' expr ')' | 'min' '(' expr ',' expr ')' | 'max' '(' expr ',' expr ')'
///            | 'dist' '(' '(' expr ',' expr ')' ',' '(' expr ',' expr ')' ')'
///
/// Comparisons are rewritten to margins: `e1 > e2` becomes `e1 - e2`,
/// `e1 < e2` becomes `e2 - e1`; a literal zero right-hand side is dropped.
/// Non-strict comparisons share the margin of their strict counterparts.
///
/// Throws ParseError (with byte offset), IndexError, IntervalError.
Formula parse_formula(std::string_view text, std::size_t state_dim);

}  // namespace safemon::stl
