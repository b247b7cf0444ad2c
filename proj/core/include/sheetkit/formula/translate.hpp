#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sheetkit/formula/ast.hpp"

namespace sheetkit::formula {

/// Shifts relative reference components by (d_row, d_col); absolute
/// components stay put. A component pushed off the grid turns the whole
/// reference into a #REF! literal. This is fill semantics: the same template
/// stamped across a range, re-anchored per cell.
ExprPtr translate_references(const Expr& e, int d_row, int d_col);

/// parse + translate_references + print in one step.
std::string translate_formula(std::string_view body, int d_row, int d_col);

enum class Axis { rows, cols };

/// Rewrites references after rows/columns `deleted` (1-based indices) are
/// removed from `sheet` with shift-up/shift-left semantics. References whose
/// sole extent lies in the deleted span become #REF!; surviving references
/// shift toward the origin by the number of deleted indices before them;
/// partially covered ranges clamp their endpoints. `home_sheet` names the
/// sheet the formula lives on, which is what a sheet-less reference means.
ExprPtr adjust_for_structural_delete(const Expr& e, std::string_view sheet, Axis axis,
                                     const std::vector<int>& deleted,
                                     std::string_view home_sheet);

} // namespace sheetkit::formula
