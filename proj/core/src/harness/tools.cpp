#include "sheetkit/harness/tools.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <vector>

#include <json.hpp>
#include "sheetkit/error.hpp"
#include "sheetkit/formula/engine.hpp"
#include "sheetkit/formula/parser.hpp"
#include "sheetkit/formula/printer.hpp"
#include "sheetkit/formula/translate.hpp"
#include "sheetkit/io.hpp"
#include "sheetkit/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace sheetkit::harness {

namespace {

json parse_args(const std::string& args) {
    if (args.empty()) return json::object();
    json a = json::parse(args); // json::exception handled by the wrapper
    if (!a.is_object()) throw Error("args must be a JSON object");
    return a;
}

Workbook load_data(WorkspaceManager& mgr, const std::string& id) {
    const fs::path path = mgr.resolve_path(id, "data.xlsx");
    if (!fs::exists(path)) throw Error("data.xlsx missing from workspace");
    const std::string bytes = read_file(path);
    try {
        return load_workbook(bytes, detect_format(bytes)).workbook;
    } catch (const Error& e) {
        throw Error("unreadable workbook: " + std::string(e.what()));
    }
}

void save_data(WorkspaceManager& mgr, const std::string& id, const Workbook& wb) {
    write_file_atomic(mgr.resolve_path(id, "data.xlsx"), save_workbook(wb, FileFormat::ooxml));
}

/// Attaches a sheet to the range: the qualifier when present, the first
/// sheet otherwise. Normalizes corner order.
Worksheet& sheet_for_range(Workbook& wb, RangeRef& range) {
    if (wb.sheets().empty()) throw Error("workbook has no sheets");
    if (range.sheet.empty()) range.sheet = wb.sheets().front().name();
    Worksheet* ws = wb.sheet(range.sheet);
    if (!ws) throw Error("unknown sheet: " + range.sheet);
    range.normalize();
    return *ws;
}

/// Whole-row/column ranges iterate only out to the populated extent.
void clamp_to_extent(RangeRef& range, const Worksheet& ws) {
    if (range.whole_col) {
        range.bottom_right.row = std::max(range.top_left.row, ws.max_row());
        range.whole_col = false;
    }
    if (range.whole_row) {
        range.bottom_right.col = std::max(range.top_left.col, ws.max_col());
        range.whole_row = false;
    }
}

std::string cell_display(const CellValue& v) {
    const std::string text = render(v);
    return text.empty() && v.is_empty() ? "(empty)" : text;
}

std::string format_descriptor(const CellFormat& f) {
    std::string out;
    auto add = [&out](const std::string& part) {
        if (!out.empty()) out += ", ";
        out += part;
    };
    if (f.number_format) add("number_format=" + *f.number_format);
    if (f.fill_argb) add("fill=" + *f.fill_argb);
    if (f.bold) add("bold");
    if (f.italic) add("italic");
    return out;
}

ToolResult done(json payload, std::string rendered) {
    ToolResult r;
    r.ok = true;
    r.payload = payload.dump();
    r.rendered = std::move(rendered);
    return r;
}

ToolResult failed(const std::string& message) {
    ToolResult r;
    r.ok = false;
    r.payload = json{{"error", message}}.dump();
    r.rendered = "error: " + message;
    return r;
}

// ---- find_cells ------------------------------------------------------------

ToolResult tool_find_cells(Workbook& wb, const json& a) {
    const std::string sheet = a.at("sheet").get<std::string>();
    const std::string query = a.at("query").get<std::string>();
    const std::string mode = a.value("mode", "contains");
    const Worksheet* ws = wb.sheet(sheet);
    if (!ws) throw Error("unknown sheet: " + sheet);
    if (mode != "contains" && mode != "exact" && mode != "regex")
        throw Error("unknown mode: " + mode);

    std::optional<std::regex> re;
    if (mode == "regex") {
        try {
            re.emplace(query);
        } catch (const std::regex_error& e) {
            throw Error("invalid regex: " + std::string(e.what()));
        }
    }

    json matches = json::array();
    std::string listing;
    int count = 0;
    for (const auto& [pos, cell] : ws->cells()) { // row-major scan
        if (!cell.has_content()) continue;
        const std::string display = render(cell.value);
        const bool hit = mode == "contains" ? display.find(query) != std::string::npos
                       : mode == "exact"    ? display == query
                                            : std::regex_search(display, *re);
        if (!hit) continue;
        const std::string address = sheet_prefix(ws->name()) + to_a1(pos);
        matches.push_back({{"address", address}, {"value", display}});
        listing += "\n" + address + ": " + display;
        ++count;
    }
    return done(json{{"count", count}, {"matches", std::move(matches)}},
                std::to_string(count) + (count == 1 ? " match" : " matches") + listing);
}

// ---- inspect_range ---------------------------------------------------------

ToolResult tool_inspect_range(Workbook& wb, const json& a) {
    RangeRef range = parse_range(a.at("range").get<std::string>());
    Worksheet& ws = sheet_for_range(wb, range);
    clamp_to_extent(range, ws);
    if (range.area() > kInspectAreaCap)
        throw Error("range covers " + std::to_string(range.area()) + " cells; the cap is " +
                    std::to_string(kInspectAreaCap) + " - inspect a smaller range");

    const bool want_formulas = a.value("formulas", false);
    const bool want_formatting = a.value("formatting", false);
    const bool want_merged = a.value("merged", false);

    json rows = json::array();
    json formula_rows = json::array();
    json format_rows = json::array();
    std::string body;
    for (int r = range.top_left.row; r <= range.bottom_right.row; ++r) {
        json row = json::array();
        json formula_row = json::array();
        json format_row = json::array();
        for (int c = range.top_left.col; c <= range.bottom_right.col; ++c) {
            const CellPos pos{r, c};
            const Cell* cell = ws.find(pos);
            const CellValue value = cell ? cell->value : CellValue::empty();
            row.push_back(render(value));

            std::string line = to_a1(pos) + ": " + cell_display(value);
            if (want_formulas) {
                if (cell && cell->formula) {
                    formula_row.push_back("=" + *cell->formula);
                    line += " [=" + *cell->formula + "]";
                } else {
                    formula_row.push_back(nullptr);
                }
            }
            if (want_formatting) {
                if (cell && cell->format && !cell->format->is_default()) {
                    const std::string desc = format_descriptor(*cell->format);
                    format_row.push_back(desc);
                    line += " {" + desc + "}";
                } else {
                    format_row.push_back(nullptr);
                }
            }
            body += "\n" + line;
        }
        rows.push_back(std::move(row));
        if (want_formulas) formula_rows.push_back(std::move(formula_row));
        if (want_formatting) format_rows.push_back(std::move(format_row));
    }

    json payload{{"range", to_a1(range)}, {"rows", std::move(rows)}};
    if (want_formulas) payload["formulas"] = std::move(formula_rows);
    if (want_formatting) payload["formatting"] = std::move(format_rows);
    if (want_merged) {
        json merged = json::array();
        std::string merged_line;
        for (const RangeRef& m : ws.merged()) {
            if (!m.intersects(range)) continue;
            const std::string text = to_a1(m, /*with_sheet=*/false);
            merged.push_back(text);
            merged_line += merged_line.empty() ? text : ", " + text;
        }
        payload["merged"] = std::move(merged);
        if (!merged_line.empty()) body += "\nmerged: " + merged_line;
    }
    return done(std::move(payload), to_a1(range) + body);
}

// ---- fill_formula ----------------------------------------------------------

ToolResult tool_fill_formula(WorkspaceManager& mgr, const std::string& id, Workbook& wb,
                             const json& a) {
    RangeRef range = parse_range(a.at("range").get<std::string>());
    Worksheet& ws = sheet_for_range(wb, range);
    if (range.whole_col || range.whole_row) throw Error("fill over an unbounded range");

    std::string body = a.at("formula").get<std::string>();
    if (!body.empty() && body[0] == '=') body.erase(0, 1);
    formula::ExprPtr ast;
    try {
        ast = formula::parse_formula(body);
    } catch (const ParseError& e) {
        // Parse failure mutates nothing.
        throw Error("formula parse error: " + std::string(e.what()));
    }

    for (int r = range.top_left.row; r <= range.bottom_right.row; ++r) {
        for (int c = range.top_left.col; c <= range.bottom_right.col; ++c) {
            auto translated = formula::translate_references(*ast, r - range.top_left.row,
                                                            c - range.top_left.col);
            ws.set_formula({r, c}, formula::print_formula(*translated));
        }
    }

    formula::recalculate(wb); // settle caches before writeback
    json circular = json::array();
    for (int r = range.top_left.row; r <= range.bottom_right.row; ++r) {
        for (int c = range.top_left.col; c <= range.bottom_right.col; ++c) {
            const CellValue v = ws.value_at({r, c});
            if (v.is_error() && v.as_error() == ErrorCode::Circ)
                circular.push_back(sheet_prefix(ws.name()) + to_a1(CellPos{r, c}));
        }
    }
    save_data(mgr, id, wb);

    std::string rendered = "filled " + std::to_string(range.area()) + " cell" +
                           (range.area() == 1 ? "" : "s") + " in " + to_a1(range) + " with =" +
                           body;
    if (!circular.empty())
        rendered += "\nwarning: circular references at " +
                    std::to_string(circular.size()) + " cell(s)";
    return done(json{{"range", to_a1(range)},
                     {"filled", range.area()},
                     {"circular", std::move(circular)}},
                std::move(rendered));
}

// ---- clear_range -----------------------------------------------------------

ToolResult tool_clear_range(WorkspaceManager& mgr, const std::string& id, Workbook& wb,
                            const json& a) {
    RangeRef range = parse_range(a.at("range").get<std::string>());
    Worksheet& ws = sheet_for_range(wb, range);
    clamp_to_extent(range, ws);

    int cleared = 0;
    for (int r = range.top_left.row; r <= range.bottom_right.row; ++r) {
        for (int c = range.top_left.col; c <= range.bottom_right.col; ++c) {
            Cell* cell = ws.find({r, c});
            if (!cell || !cell->has_content()) continue;
            cell->value = CellValue::empty();
            cell->formula.reset();
            cell->spill_origin.reset();
            if (!cell->format) ws.erase({r, c}); // formatting-only cells stay
            ++cleared;
        }
    }
    formula::recalculate(wb);
    save_data(mgr, id, wb);
    return done(json{{"range", to_a1(range)}, {"cleared", cleared}},
                "cleared " + std::to_string(cleared) + " cell" + (cleared == 1 ? "" : "s") +
                    " in " + to_a1(range));
}

// ---- delete_rows / delete_columns -------------------------------------------

int axis_index(CellPos pos, formula::Axis axis) {
    return axis == formula::Axis::rows ? pos.row : pos.col;
}

/// Indices deleted strictly before `i` — how far a survivor slides.
int shift_before(const std::vector<int>& deleted, int i) {
    return static_cast<int>(std::lower_bound(deleted.begin(), deleted.end(), i) -
                            deleted.begin());
}

void structural_delete(Workbook& wb, Worksheet& target, formula::Axis axis,
                       const std::set<int>& deleted_set) {
    const std::vector<int> deleted(deleted_set.begin(), deleted_set.end());

    // Cells: drop deleted indices, slide the rest toward the origin. Spill
    // slaves are derived state; recalculation rebuilds them.
    std::map<CellPos, Cell> remapped;
    for (auto& [pos, cell] : target.cells()) {
        if (cell.spill_origin) continue;
        const int i = axis_index(pos, axis);
        if (deleted_set.count(i)) continue;
        CellPos moved = pos;
        (axis == formula::Axis::rows ? moved.row : moved.col) = i - shift_before(deleted, i);
        remapped.emplace(moved, std::move(cell));
    }
    target.cells() = std::move(remapped);

    // Merged ranges shrink over the deleted span; fully covered or collapsed
    // to a single cell, they disappear.
    std::vector<RangeRef> merged;
    for (RangeRef m : target.merged()) {
        m.normalize();
        const int start = axis_index(m.top_left.pos(), axis);
        const int end = axis_index(m.bottom_right.pos(), axis);
        int lo = 0, hi = -1;
        for (int i = start; i <= end; ++i) {
            if (deleted_set.count(i)) continue;
            const int shifted = i - shift_before(deleted, i);
            if (hi < 0) lo = shifted;
            hi = shifted;
        }
        if (hi < 0) continue; // merge fully deleted
        (axis == formula::Axis::rows ? m.top_left.row : m.top_left.col) = lo;
        (axis == formula::Axis::rows ? m.bottom_right.row : m.bottom_right.col) = hi;
        if (m.area() > 1) merged.push_back(std::move(m));
    }
    target.merged() = std::move(merged);

    // Every surviving formula anywhere in the book gets its references to the
    // target sheet rewritten.
    for (Worksheet& sheet : wb.sheets()) {
        for (auto& [pos, cell] : sheet.cells()) {
            if (!cell.formula) continue;
            try {
                auto adjusted = formula::adjust_for_structural_delete(
                    *formula::parse_formula(*cell.formula), target.name(), axis, deleted,
                    sheet.name());
                cell.formula = formula::print_formula(*adjusted);
            } catch (const ParseError&) {
                // Unparseable stored formula: leave the text as-is.
            }
        }
    }

    // Defined names pointing into the target sheet shrink the same way.
    for (auto it = wb.defined_names().begin(); it != wb.defined_names().end();) {
        RangeRef& range = it->second;
        if (!sheet_name_equal(range.sheet, target.name())) {
            ++it;
            continue;
        }
        range.normalize();
        const int start = axis_index(range.top_left.pos(), axis);
        const int end = axis_index(range.bottom_right.pos(), axis);
        int lo = 0, hi = -1;
        for (int i = start; i <= end; ++i) {
            if (deleted_set.count(i)) continue;
            const int shifted = i - shift_before(deleted, i);
            if (hi < 0) lo = shifted;
            hi = shifted;
        }
        if (hi < 0) {
            it = wb.defined_names().erase(it);
            continue;
        }
        (axis == formula::Axis::rows ? range.top_left.row : range.top_left.col) = lo;
        (axis == formula::Axis::rows ? range.bottom_right.row : range.bottom_right.col) = hi;
        ++it;
    }
}

ToolResult tool_delete(WorkspaceManager& mgr, const std::string& id, Workbook& wb, const json& a,
                       formula::Axis axis) {
    const std::string sheet = a.at("sheet").get<std::string>();
    Worksheet* ws = wb.sheet(sheet);
    if (!ws) throw Error("unknown sheet: " + sheet);

    const char* key = axis == formula::Axis::rows ? "rows" : "columns";
    const char* what = axis == formula::Axis::rows ? "row" : "column";
    std::set<int> indices;
    for (const json& v : a.at(key)) indices.insert(v.get<int>());
    if (indices.empty()) throw Error("empty index set");
    const int extent = axis == formula::Axis::rows ? ws->max_row() : ws->max_col();
    for (int i : indices) {
        if (i < 1 || i > extent)
            throw Error(std::string(what) + " index out of range: " + std::to_string(i));
    }

    structural_delete(wb, *ws, axis, indices);
    formula::recalculate(wb);
    save_data(mgr, id, wb);

    json listed = json::array();
    std::string listing;
    for (int i : indices) {
        listed.push_back(i);
        if (!listing.empty()) listing += ",";
        listing += axis == formula::Axis::cols ? column_letters(i) : std::to_string(i);
    }
    return done(json{{"sheet", ws->name()}, {key, std::move(listed)}},
                "deleted " + std::to_string(indices.size()) + " " + what +
                    (indices.size() == 1 ? "" : "s") + " (" + listing + ") from " + ws->name());
}

// ---- recalculate_and_read ----------------------------------------------------

ToolResult tool_recalculate_and_read(WorkspaceManager& mgr, const std::string& id, Workbook& wb,
                                     const json& a) {
    const json& ranges = a.at("ranges");
    if (!ranges.is_array() || ranges.empty()) throw Error("ranges must be a nonempty array");
    const bool writeback = a.value("writeback", false);

    formula::recalculate(wb);

    json out = json::array();
    std::string body;
    for (const json& r : ranges) {
        RangeRef range = parse_range(r.get<std::string>());
        Worksheet& ws = sheet_for_range(wb, range);
        clamp_to_extent(range, ws);
        json rows = json::array();
        body += body.empty() ? to_a1(range) : "\n" + to_a1(range);
        for (int row = range.top_left.row; row <= range.bottom_right.row; ++row) {
            json cells = json::array();
            for (int col = range.top_left.col; col <= range.bottom_right.col; ++col) {
                const CellValue v = ws.value_at({row, col});
                cells.push_back(render(v));
                body += "\n" + to_a1(CellPos{row, col}) + ": " + cell_display(v);
            }
            rows.push_back(std::move(cells));
        }
        out.push_back(json{{"range", to_a1(range)}, {"rows", std::move(rows)}});
    }
    if (writeback) save_data(mgr, id, wb);
    return done(json{{"ranges", std::move(out)}, {"writeback", writeback}}, std::move(body));
}

// ---- code_interpreter --------------------------------------------------------

ToolResult tool_code_interpreter(WorkspaceManager& mgr, const std::string& id,
                                 SandboxClient* sandbox, const json& a) {
    const std::string code = a.at("code").get<std::string>();
    const fs::path dir = mgr.open(id).dir;
    StubSandbox stub;
    SandboxResult r = (sandbox ? *sandbox : static_cast<SandboxClient&>(stub)).execute(code, dir);

    std::string rendered;
    if (!r.error.empty()) {
        rendered = r.error;
    } else {
        rendered = r.stdout_text;
        if (!r.stderr_text.empty()) rendered += (rendered.empty() ? "" : "\n") +
                                                ("[stderr] " + r.stderr_text);
        if (r.exit_code != 0) rendered += (rendered.empty() ? "" : "\n") +
                                          ("exit code " + std::to_string(r.exit_code));
        if (rendered.empty()) rendered = "(no output)";
    }
    ToolResult result;
    result.ok = r.ok;
    result.payload = json{{"ok", r.ok},
                          {"stdout", r.stdout_text},
                          {"stderr", r.stderr_text},
                          {"exit_code", r.exit_code},
                          {"error", r.error}}
                         .dump();
    result.rendered = std::move(rendered);
    return result;
}

/// Truncates to the cap with a marker, trimming back to a UTF-8 boundary.
void enforce_cap(ToolResult& r, std::size_t cap) {
    static constexpr std::string_view marker = "...[truncated]";
    if (r.rendered.size() <= cap) return;
    std::size_t keep = cap > marker.size() ? cap - marker.size() : 0;
    while (keep > 0 && (static_cast<unsigned char>(r.rendered[keep]) & 0xC0) == 0x80) --keep;
    r.rendered.resize(keep);
    r.rendered += marker;
    r.truncated = true;
}

} // namespace

bool is_write_call(const ToolCall& call) {
    if (call.name == "fill_formula" || call.name == "clear_range" || call.name == "delete_rows" ||
        call.name == "delete_columns" || call.name == "code_interpreter")
        return true;
    if (call.name == "recalculate_and_read") {
        try {
            return parse_args(call.args).value("writeback", false);
        } catch (...) {
            return false; // malformed args fail at execution; classify as read
        }
    }
    return false;
}

ToolResult execute_tool(WorkspaceManager& manager, const std::string& workspace_id,
                        const ToolCall& call, SandboxClient* sandbox, std::size_t max_rendered) {
    ToolResult result;
    try {
        const json a = parse_args(call.args);
        if (call.name == "find_cells") {
            Workbook wb = load_data(manager, workspace_id);
            result = tool_find_cells(wb, a);
        } else if (call.name == "inspect_range") {
            Workbook wb = load_data(manager, workspace_id);
            result = tool_inspect_range(wb, a);
        } else if (call.name == "fill_formula") {
            Workbook wb = load_data(manager, workspace_id);
            result = tool_fill_formula(manager, workspace_id, wb, a);
        } else if (call.name == "clear_range") {
            Workbook wb = load_data(manager, workspace_id);
            result = tool_clear_range(manager, workspace_id, wb, a);
        } else if (call.name == "delete_rows") {
            Workbook wb = load_data(manager, workspace_id);
            result = tool_delete(manager, workspace_id, wb, a, formula::Axis::rows);
        } else if (call.name == "delete_columns") {
            Workbook wb = load_data(manager, workspace_id);
            result = tool_delete(manager, workspace_id, wb, a, formula::Axis::cols);
        } else if (call.name == "recalculate_and_read") {
            Workbook wb = load_data(manager, workspace_id);
            result = tool_recalculate_and_read(manager, workspace_id, wb, a);
        } else if (call.name == "code_interpreter") {
            result = tool_code_interpreter(manager, workspace_id, sandbox, a);
        } else {
            throw Error("unknown tool: " + call.name);
        }
    } catch (const json::exception& e) {
        result = failed("bad arguments: " + std::string(e.what()));
    } catch (const Error& e) {
        result = failed(e.what());
    }
    enforce_cap(result, max_rendered);
    return result;
}

} // namespace sheetkit::harness
