#pragma once

#include <json.hpp>

#include "sheetkit/io.hpp"
#include "sheetkit/workbook.hpp"

namespace sheetkit {

// Canonical JSON workbook format. Cells are keyed by A1 address with fields
//   v    value: number | string | bool | {"t":"datetime","iso":...}
//                | {"t":"time","iso":"HH:MM:SS"} | {"t":"error","code":"#..."}
//   f    formula body without '='
//   fmt  {"numfmt": str, "fill": ARGB, "bold": bool, "italic": bool}
//   spill  A1 address of the spill origin
nlohmann::ordered_json workbook_to_json(const Workbook& workbook);
LoadResult workbook_from_json(const nlohmann::json& doc);

nlohmann::ordered_json cell_value_to_json(const CellValue& value);
CellValue cell_value_from_json(const nlohmann::json& node);

} // namespace sheetkit
