#pragma once

#include <string_view>

#include "sheetkit/formula/ast.hpp"

namespace sheetkit::formula {

/// Parses a formula body (leading '=' already stripped) into an AST.
///
/// Grammar, loosest binding first:
///   comparison   =  <>  <  <=  >  >=      (left-assoc)
///   concat       &
///   additive     +  -
///   multiplicative *  /
///   power        ^
///   postfix      %
///   unary        -  +
///   primary      number | "string" (doubled-quote escape) | TRUE | FALSE |
///                #ERROR! | cell | range | NAME(args) | (expr) | {a,b;c,d}
///
/// Unknown function names parse fine — name resolution is an evaluation
/// concern. Throws ParseError carrying the offending position.
ExprPtr parse_formula(std::string_view text);

} // namespace sheetkit::formula
