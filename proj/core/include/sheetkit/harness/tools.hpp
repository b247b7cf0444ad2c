#pragma once

#include <cstddef>
#include <string>

#include "sheetkit/harness/sandbox.hpp"
#include "sheetkit/workspace.hpp"

namespace sheetkit::harness {

/// inspect_range refuses ranges above this many cells.
inline constexpr int kInspectAreaCap = 2000;

/// One tool invocation. `args` is a JSON object; the fields per tool:
///   find_cells            {"sheet", "query", "mode": "contains"|"exact"|"regex"}
///   inspect_range         {"range", "formulas"?, "formatting"?, "merged"?}
///   fill_formula          {"range", "formula"}
///   clear_range           {"range"}
///   delete_rows           {"sheet", "rows": [ints]}
///   delete_columns        {"sheet", "columns": [ints]}
///   recalculate_and_read  {"ranges": [strings], "writeback"?}
///   code_interpreter      {"code"}
/// Range strings are A1 notation, optionally sheet-qualified; unqualified
/// ranges address the first sheet.
struct ToolCall {
    std::string name;
    std::string args; ///< JSON object text
};

struct ToolResult {
    bool ok = false;
    std::string payload;  ///< JSON: structured result, or {"error": "..."}
    std::string rendered; ///< display text, capped with a truncation marker
    bool truncated = false;
};

/// Write classification for the turn protocol: fill_formula, clear_range,
/// delete_rows, delete_columns, code_interpreter, and recalculate_and_read
/// with writeback true.
bool is_write_call(const ToolCall& call);

/// Executes one tool against the workspace's data.xlsx. Tool failures
/// (unknown sheet, bad args, parse errors, area cap, ...) come back as
/// ok=false results rather than exceptions; write tools save data.xlsx
/// before returning. `max_rendered` caps the rendered text.
ToolResult execute_tool(WorkspaceManager& manager, const std::string& workspace_id,
                        const ToolCall& call, SandboxClient* sandbox = nullptr,
                        std::size_t max_rendered = 8192);

} // namespace sheetkit::harness
