#pragma once

#include <string>
#include <string_view>

#include "sheetkit/io.hpp"

namespace sheetkit {

// OOXML (.xlsx) package read/write.
//
// Coverage: cell values (numbers, shared/inline strings, booleans, errors,
// date/time serials), formulas with cached values (including shared and
// array formulas), number formats, solid fills, bold/italic, merged ranges,
// defined names. Charts, pivot tables, VBA, and comments are skipped with a
// warning.
//
// OOXML stores dates as numeric serials whose "date-ness" lives in the cell's
// number format, so a numeric cell with a date-classified format always loads
// as DateTime/TimeOfDay. DateTime and TimeOfDay values without an explicit
// number format are written with a default code (yyyy-mm-dd [hh:mm:ss] /
// hh:mm:ss) which is stripped again on load; the round-trip is stable.
//
// Writing is deterministic: fixed part order, first-encounter string/style
// tables, fixed ZIP timestamps. Saving the same workbook twice yields
// byte-identical files.

LoadResult xlsx_load(std::string_view bytes);
std::string xlsx_save(const Workbook& workbook);

} // namespace sheetkit
