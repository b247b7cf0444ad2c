#include "sheetkit/json_io.hpp"

#include <cstdio>

#include "sheetkit/error.hpp"

namespace sheetkit {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string iso_datetime(const DateTime& dt) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", dt.year, dt.month, dt.day,
                  dt.hour, dt.minute, dt.second);
    return buf;
}

std::string iso_time(const TimeOfDay& t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d", t.hour, t.minute, t.second);
    return buf;
}

DateTime parse_iso_datetime(const std::string& s) {
    DateTime dt;
    int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &dt.year, &dt.month, &dt.day, &dt.hour,
                        &dt.minute, &dt.second);
    if (n != 3 && n != 6) throw IoError("bad datetime literal '" + s + "'");
    if (n == 3) dt.hour = dt.minute = dt.second = 0;
    return dt;
}

TimeOfDay parse_iso_time(const std::string& s) {
    TimeOfDay t;
    int n = std::sscanf(s.c_str(), "%d:%d:%d", &t.hour, &t.minute, &t.second);
    if (n < 2) throw IoError("bad time literal '" + s + "'");
    if (n == 2) t.second = 0;
    return t;
}

ordered_json format_to_json(const CellFormat& fmt) {
    ordered_json out = ordered_json::object();
    if (fmt.number_format) out["numfmt"] = *fmt.number_format;
    if (fmt.fill_argb) out["fill"] = *fmt.fill_argb;
    if (fmt.bold) out["bold"] = true;
    if (fmt.italic) out["italic"] = true;
    return out;
}

CellFormat format_from_json(const json& node) {
    CellFormat fmt;
    if (node.contains("numfmt")) fmt.number_format = node.at("numfmt").get<std::string>();
    if (node.contains("fill")) fmt.fill_argb = node.at("fill").get<std::string>();
    fmt.bold = node.value("bold", false);
    fmt.italic = node.value("italic", false);
    return fmt;
}

} // namespace

nlohmann::ordered_json cell_value_to_json(const CellValue& value) {
    if (value.is_number()) return value.as_number();
    if (value.is_text()) return value.as_text();
    if (value.is_boolean()) return value.as_boolean();
    if (value.is_datetime())
        return ordered_json{{"t", "datetime"}, {"iso", iso_datetime(value.as_datetime())}};
    if (value.is_time()) return ordered_json{{"t", "time"}, {"iso", iso_time(value.as_time())}};
    if (value.is_error())
        return ordered_json{{"t", "error"}, {"code", std::string(to_string(value.as_error()))}};
    return nullptr; // Empty
}

CellValue cell_value_from_json(const json& node) {
    if (node.is_null()) return CellValue::empty();
    if (node.is_number()) return CellValue::number(node.get<double>());
    if (node.is_string()) return CellValue::text(node.get<std::string>());
    if (node.is_boolean()) return CellValue::boolean(node.get<bool>());
    if (node.is_object()) {
        const std::string t = node.value("t", "");
        if (t == "datetime")
            return CellValue::datetime(parse_iso_datetime(node.at("iso").get<std::string>()));
        if (t == "time") return CellValue::time(parse_iso_time(node.at("iso").get<std::string>()));
        if (t == "error") {
            auto code = parse_error_code(node.at("code").get<std::string>());
            if (!code) throw IoError("unknown error code " + node.at("code").dump());
            return CellValue::error(*code);
        }
        throw IoError("unknown tagged value type '" + t + "'");
    }
    throw IoError("unsupported cell value " + node.dump());
}

nlohmann::ordered_json workbook_to_json(const Workbook& workbook) {
    ordered_json doc;
    doc["sheets"] = ordered_json::array();
    for (const Worksheet& sheet : workbook.sheets()) {
        ordered_json s;
        s["name"] = sheet.name();
        ordered_json cells = ordered_json::object();
        for (const auto& [pos, cell] : sheet.cells()) {
            ordered_json c = ordered_json::object();
            if (cell.formula) c["f"] = *cell.formula;
            if (!cell.value.is_empty() || !cell.formula) c["v"] = cell_value_to_json(cell.value);
            if (cell.format && !cell.format->is_default()) c["fmt"] = format_to_json(*cell.format);
            if (cell.spill_origin) c["spill"] = to_a1(*cell.spill_origin);
            if (c.empty()) c["v"] = nullptr;
            cells[to_a1(pos)] = std::move(c);
        }
        s["cells"] = std::move(cells);
        if (!sheet.merged().empty()) {
            ordered_json merged = ordered_json::array();
            for (const RangeRef& m : sheet.merged()) merged.push_back(to_a1(m, false));
            s["merged"] = std::move(merged);
        }
        doc["sheets"].push_back(std::move(s));
    }
    if (!workbook.defined_names().empty()) {
        ordered_json names = ordered_json::object();
        for (const auto& [name, range] : workbook.defined_names()) names[name] = to_a1(range);
        doc["defined_names"] = std::move(names);
    }
    return doc;
}

LoadResult workbook_from_json(const json& doc) {
    LoadResult result;
    if (!doc.is_object() || !doc.contains("sheets"))
        throw IoError("JSON workbook must be an object with a 'sheets' array");
    for (const json& s : doc.at("sheets")) {
        Worksheet& sheet = result.workbook.add_sheet(s.at("name").get<std::string>());
        if (s.contains("cells")) {
            for (const auto& [addr, node] : s.at("cells").items()) {
                A1Target target = parse_a1(addr);
                const CellRef* ref = std::get_if<CellRef>(&target);
                if (!ref) throw IoError("cell key '" + addr + "' is not a single cell");
                Cell cell;
                if (node.contains("f")) cell.formula = node.at("f").get<std::string>();
                if (node.contains("v")) cell.value = cell_value_from_json(node.at("v"));
                if (node.contains("fmt")) cell.format = format_from_json(node.at("fmt"));
                if (node.contains("spill")) {
                    A1Target origin = parse_a1(node.at("spill").get<std::string>());
                    cell.spill_origin = std::get<CellRef>(origin).pos();
                }
                sheet.cells()[ref->pos()] = std::move(cell);
            }
        }
        if (s.contains("merged")) {
            for (const json& m : s.at("merged")) {
                // Merges are sheet-local; the range stays unqualified.
                sheet.merged().push_back(parse_range(m.get<std::string>()));
            }
        }
    }
    if (doc.contains("defined_names")) {
        for (const auto& [name, text] : doc.at("defined_names").items())
            result.workbook.defined_names()[name] = parse_range(text.get<std::string>());
    }
    return result;
}

} // namespace sheetkit
