#pragma once

#include <string>

#include "sheetkit/formula/ast.hpp"

namespace sheetkit::formula {

/// Canonical formula text (no leading '='). Parenthesizes exactly where the
/// tree shape requires it, so print(parse(t)) re-parses to an equal tree.
std::string print_formula(const Expr& e);

} // namespace sheetkit::formula
