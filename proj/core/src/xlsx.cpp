#include "sheetkit/xlsx.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "sheetkit/error.hpp"
#include "sheetkit/formula/translate.hpp"
#include "sheetkit/json_io.hpp"
#include "sheetkit/zip.hpp"

namespace sheetkit {

namespace {

namespace pt = boost::property_tree;

constexpr const char* kNsMain = "http://schemas.openxmlformats.org/spreadsheetml/2006/main";
constexpr const char* kNsRel = "http://schemas.openxmlformats.org/officeDocument/2006/relationships";
constexpr const char* kXmlDecl = "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n";

// ---------------------------------------------------------------------------
// XML helpers (reading goes through property_tree; writing is hand-assembled
// so the byte stream is fully deterministic).

std::string_view local_name(std::string_view key) {
    auto pos = key.rfind(':');
    return pos == std::string_view::npos ? key : key.substr(pos + 1);
}

pt::ptree parse_xml(const std::string& content, const std::string& part) {
    pt::ptree tree;
    std::istringstream in(content);
    try {
        pt::read_xml(in, tree, pt::xml_parser::no_comments);
    } catch (const pt::xml_parser_error& e) {
        throw IoError("xlsx: malformed XML in " + part + ": " + e.message());
    }
    return tree;
}

const pt::ptree* find_child(const pt::ptree& node, std::string_view local) {
    for (const auto& [key, child] : node) {
        if (key != "<xmlattr>" && local_name(key) == local) return &child;
    }
    return nullptr;
}

const pt::ptree& require_root(const pt::ptree& doc, std::string_view local,
                              const std::string& part) {
    if (const pt::ptree* root = find_child(doc, local)) return *root;
    throw IoError("xlsx: " + part + " has no <" + std::string(local) + "> root");
}

template <typename F>
void for_each_child(const pt::ptree& node, std::string_view local, F&& f) {
    for (const auto& [key, child] : node) {
        if (key != "<xmlattr>" && local_name(key) == local) f(child);
    }
}

std::string attr(const pt::ptree& node, std::string_view name, std::string dflt = "") {
    if (auto attrs = node.get_child_optional("<xmlattr>")) {
        for (const auto& [key, value] : *attrs) {
            if (local_name(key) == name) return value.data();
        }
    }
    return dflt;
}

int attr_int(const pt::ptree& node, std::string_view name, int dflt = 0) {
    std::string text = attr(node, name);
    if (text.empty()) return dflt;
    return std::atoi(text.c_str());
}

std::string xml_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Concatenates <t> text under an <si> or <is>, including rich-text <r> runs.
void collect_text(const pt::ptree& node, std::string& out) {
    for (const auto& [key, child] : node) {
        if (key == "<xmlattr>") continue;
        std::string_view local = local_name(key);
        if (local == "t")
            out += child.data();
        else if (local == "r")
            collect_text(child, out);
    }
}

// ---------------------------------------------------------------------------
// Number formats.

enum class FmtKind { none, date, time, datetime };

// Builtin numFmtId table, kept symmetric: every id written maps back to the
// same code on read.
constexpr std::pair<int, const char*> kBuiltinFormats[] = {
    {1, "0"},           {2, "0.00"},         {3, "#,##0"},     {4, "#,##0.00"},
    {9, "0%"},          {10, "0.00%"},       {11, "0.00E+00"}, {12, "# ?/?"},
    {13, "# ?\?/??"},   {14, "mm-dd-yy"},    {15, "d-mmm-yy"}, {16, "d-mmm"},
    {17, "mmm-yy"},     {18, "h:mm AM/PM"},  {19, "h:mm:ss AM/PM"},
    {20, "h:mm"},       {21, "h:mm:ss"},     {22, "m/d/yy h:mm"},
    {45, "mm:ss"},      {46, "[h]:mm:ss"},   {47, "mmss.0"},   {48, "##0.0E+0"},
    {49, "@"},
};

int builtin_format_id(std::string_view code) {
    if (code == "General") return 0;
    for (auto [id, c] : kBuiltinFormats)
        if (code == c) return id;
    return -1;
}

const char* builtin_format_code(int id) {
    for (auto [bid, code] : kBuiltinFormats)
        if (bid == id) return code;
    return nullptr;
}

// Date/time-ness of a format code: y/d flag a date, h/s flag a time, outside
// quoted sections and escapes. Bracket sections only count when they are a
// pure elapsed-time token like [h]; [Red] and conditions are ignored.
FmtKind classify_format(std::string_view code) {
    if (code.empty() || code == "General") return FmtKind::none;
    bool date = false, time = false;
    for (std::size_t i = 0; i < code.size(); ++i) {
        char c = code[i];
        if (c == '"') {
            while (++i < code.size() && code[i] != '"') {}
        } else if (c == '\\' || c == '_' || c == '*') {
            ++i;
        } else if (c == '[') {
            std::size_t end = code.find(']', i + 1);
            if (end == std::string_view::npos) break;
            std::string_view inner = code.substr(i + 1, end - i - 1);
            bool elapsed = !inner.empty() &&
                           inner.find_first_not_of("hmsHMS") == std::string_view::npos;
            if (elapsed) {
                for (char e : inner) {
                    if (e == 'h' || e == 'H' || e == 's' || e == 'S') time = true;
                }
            }
            i = end;
        } else {
            switch (c) {
                case 'y': case 'Y': case 'd': case 'D': date = true; break;
                case 'h': case 'H': case 's': case 'S': time = true; break;
                default: break;
            }
        }
    }
    if (date && time) return FmtKind::datetime;
    if (date) return FmtKind::date;
    if (time) return FmtKind::time;
    return FmtKind::none;
}

// Default code a DateTime/TimeOfDay value is written with when the cell has
// no explicit number format. Stripped again on load so values without
// explicit formats round-trip unchanged.
std::string implicit_format(const CellValue& v) {
    if (v.is_datetime()) {
        const DateTime& dt = v.as_datetime();
        bool midnight = dt.hour == 0 && dt.minute == 0 && dt.second == 0;
        return midnight ? "yyyy-mm-dd" : "yyyy-mm-dd hh:mm:ss";
    }
    if (v.is_time()) return "hh:mm:ss";
    return "";
}

// ---------------------------------------------------------------------------
// Reader.

struct XfInfo {
    std::string code;
    FmtKind kind = FmtKind::none;
    std::string fill;
    bool bold = false;
    bool italic = false;
};

bool flag_child(const pt::ptree& node, std::string_view name) {
    const pt::ptree* child = find_child(node, name);
    if (!child) return false;
    std::string val = attr(*child, "val");
    return val.empty() || (val != "0" && val != "false");
}

struct Reader {
    const ZipReader& zip;
    LoadResult result;
    std::set<std::string> warned;

    std::vector<std::string> shared_strings;
    std::vector<XfInfo> xfs;

    explicit Reader(const ZipReader& z) : zip(z) {}

    void warn(std::string message) {
        if (warned.insert(message).second) result.warnings.push_back(std::move(message));
    }

    void scan_unsupported_parts() {
        static constexpr std::pair<const char*, const char*> kFeatures[] = {
            {"xl/charts/", "charts"},
            {"xl/drawings/", "drawings"},
            {"xl/pivotTables/", "pivot tables"},
            {"xl/pivotCache/", "pivot caches"},
            {"xl/media/", "embedded media"},
            {"xl/vbaProject", "VBA project"},
            {"xl/comments", "cell comments"},
            {"xl/threadedComments", "cell comments"},
        };
        for (const std::string& name : zip.names()) {
            for (auto [prefix, feature] : kFeatures) {
                if (name.rfind(prefix, 0) == 0)
                    warn(std::string("skipped unsupported content: ") + feature);
            }
        }
    }

    void load_shared_strings() {
        if (!zip.contains("xl/sharedStrings.xml")) return;
        pt::ptree doc = parse_xml(zip.read("xl/sharedStrings.xml"), "sharedStrings.xml");
        const pt::ptree& sst = require_root(doc, "sst", "sharedStrings.xml");
        for_each_child(sst, "si", [&](const pt::ptree& si) {
            std::string text;
            collect_text(si, text);
            shared_strings.push_back(std::move(text));
        });
    }

    void load_styles() {
        if (!zip.contains("xl/styles.xml")) return;
        pt::ptree doc = parse_xml(zip.read("xl/styles.xml"), "styles.xml");
        const pt::ptree& root = require_root(doc, "styleSheet", "styles.xml");

        std::map<int, std::string> custom;
        if (const pt::ptree* fmts = find_child(root, "numFmts")) {
            for_each_child(*fmts, "numFmt", [&](const pt::ptree& f) {
                custom[attr_int(f, "numFmtId")] = attr(f, "formatCode");
            });
        }

        std::vector<std::pair<bool, bool>> fonts;
        if (const pt::ptree* fs = find_child(root, "fonts")) {
            for_each_child(*fs, "font", [&](const pt::ptree& f) {
                fonts.emplace_back(flag_child(f, "b"), flag_child(f, "i"));
            });
        }

        std::vector<std::string> fills;
        if (const pt::ptree* fls = find_child(root, "fills")) {
            for_each_child(*fls, "fill", [&](const pt::ptree& f) {
                std::string argb;
                if (const pt::ptree* pat = find_child(f, "patternFill")) {
                    if (attr(*pat, "patternType") == "solid") {
                        if (const pt::ptree* fg = find_child(*pat, "fgColor"))
                            argb = attr(*fg, "rgb");
                    }
                }
                fills.push_back(std::move(argb));
            });
        }

        if (const pt::ptree* cellxfs = find_child(root, "cellXfs")) {
            for_each_child(*cellxfs, "xf", [&](const pt::ptree& xf) {
                XfInfo info;
                int fmt_id = attr_int(xf, "numFmtId");
                if (auto it = custom.find(fmt_id); it != custom.end())
                    info.code = it->second;
                else if (const char* code = builtin_format_code(fmt_id))
                    info.code = code;
                info.kind = classify_format(info.code);
                std::size_t font_id = static_cast<std::size_t>(attr_int(xf, "fontId"));
                if (font_id < fonts.size()) {
                    info.bold = fonts[font_id].first;
                    info.italic = fonts[font_id].second;
                }
                std::size_t fill_id = static_cast<std::size_t>(attr_int(xf, "fillId"));
                if (fill_id < fills.size()) info.fill = fills[fill_id];
                xfs.push_back(std::move(info));
            });
        }
    }

    static CellPos pos_from_r(const std::string& r, const std::string& part) {
        try {
            A1Target target = parse_a1(r);
            if (const CellRef* ref = std::get_if<CellRef>(&target)) return ref->pos();
        } catch (const Error&) {
        }
        throw IoError("xlsx: bad cell reference '" + r + "' in " + part);
    }

    CellValue decode_value(const std::string& type, const std::string& raw,
                           const pt::ptree& c, const XfInfo& xf) {
        if (type == "s") {
            if (raw.empty()) return CellValue::text("");
            std::size_t idx = static_cast<std::size_t>(std::atoll(raw.c_str()));
            if (idx >= shared_strings.size())
                throw IoError("xlsx: shared string index out of range");
            return CellValue::text(shared_strings[idx]);
        }
        if (type == "str") return CellValue::text(raw);
        if (type == "inlineStr") {
            std::string text;
            if (const pt::ptree* is = find_child(c, "is")) collect_text(*is, text);
            return CellValue::text(text);
        }
        if (type == "b") return CellValue::boolean(raw == "1" || raw == "true");
        if (type == "e") {
            if (auto code = parse_error_code(raw)) return CellValue::error(*code);
            warn("unrecognized error literal kept as text: " + raw);
            return CellValue::text(raw);
        }
        if (type == "d") {
            DateTime dt;
            if (std::sscanf(raw.c_str(), "%d-%d-%dT%d:%d:%d", &dt.year, &dt.month, &dt.day,
                            &dt.hour, &dt.minute, &dt.second) >= 3)
                return CellValue::datetime(dt);
            throw IoError("xlsx: bad ISO date value '" + raw + "'");
        }
        // Default: numeric. The style decides whether the serial is a date.
        if (raw.empty()) return CellValue::empty();
        double num = std::strtod(raw.c_str(), nullptr);
        switch (xf.kind) {
            case FmtKind::date:
            case FmtKind::datetime:
                return CellValue::datetime(datetime_from_serial(num));
            case FmtKind::time:
                return CellValue::time(time_from_fraction(num - std::floor(num)));
            case FmtKind::none:
                return CellValue::number(num);
        }
        return CellValue::number(num);
    }

    void load_sheet(Worksheet& ws, const std::string& part) {
        pt::ptree doc = parse_xml(zip.read(part), part);
        const pt::ptree& root = require_root(doc, "worksheet", part);

        struct SharedFormula {
            CellPos origin;
            std::string text;
        };
        std::map<std::string, SharedFormula> shared;
        std::vector<std::pair<CellPos, RangeRef>> array_ranges;

        const pt::ptree* sheet_data = find_child(root, "sheetData");
        if (!sheet_data) throw IoError("xlsx: " + part + " has no sheetData");

        for_each_child(*sheet_data, "row", [&](const pt::ptree& row) {
            int row_num = attr_int(row, "r", ws.max_row() + 1);
            int next_col = 1;
            for_each_child(row, "c", [&](const pt::ptree& c) {
                std::string r = attr(c, "r");
                CellPos pos = r.empty() ? CellPos{row_num, next_col} : pos_from_r(r, part);
                next_col = pos.col + 1;

                const XfInfo* xf = nullptr;
                static const XfInfo kNoStyle{};
                std::size_t style = static_cast<std::size_t>(attr_int(c, "s"));
                xf = style < xfs.size() ? &xfs[style] : &kNoStyle;

                Cell cell;
                if (const pt::ptree* f = find_child(c, "f")) {
                    std::string ftype = attr(*f, "t");
                    std::string text = f->data();
                    if (ftype == "shared") {
                        std::string si = attr(*f, "si");
                        if (!text.empty()) {
                            shared[si] = SharedFormula{pos, text};
                            cell.formula = text;
                        } else if (auto it = shared.find(si); it != shared.end()) {
                            int dr = pos.row - it->second.origin.row;
                            int dc = pos.col - it->second.origin.col;
                            try {
                                cell.formula =
                                    formula::translate_formula(it->second.text, dr, dc);
                            } catch (const Error&) {
                                warn("shared formula outside the supported grammar copied verbatim");
                                cell.formula = it->second.text;
                            }
                        } else {
                            warn("shared formula with unknown group dropped");
                        }
                    } else {
                        if (!text.empty()) cell.formula = text;
                        if (ftype == "array") {
                            std::string ref = attr(*f, "ref");
                            if (!ref.empty()) {
                                try {
                                    RangeRef range = parse_range(ref);
                                    if (range.area() > 1) array_ranges.emplace_back(pos, range);
                                } catch (const Error&) {
                                    warn("array formula with bad ref attribute: " + ref);
                                }
                            }
                        }
                    }
                }

                std::string type = attr(c, "t");
                const pt::ptree* v = find_child(c, "v");
                if (v || type == "inlineStr")
                    cell.value = decode_value(type, v ? v->data() : std::string(), c, *xf);

                CellFormat fmt;
                fmt.bold = xf->bold;
                fmt.italic = xf->italic;
                if (!xf->fill.empty()) fmt.fill_argb = xf->fill;
                if (!xf->code.empty() && xf->code != implicit_format(cell.value))
                    fmt.number_format = xf->code;
                if (!fmt.is_default()) cell.format = fmt;

                if (cell.has_content() || cell.format) ws.cells()[pos] = std::move(cell);
            });
        });

        for (const auto& [origin, range] : array_ranges) {
            for (int row = range.top_left.row; row <= range.bottom_right.row; ++row) {
                for (int col = range.top_left.col; col <= range.bottom_right.col; ++col) {
                    CellPos pos{row, col};
                    if (pos == origin) continue;
                    if (Cell* cell = ws.find(pos)) cell->spill_origin = origin;
                }
            }
        }

        if (const pt::ptree* merges = find_child(root, "mergeCells")) {
            for_each_child(*merges, "mergeCell", [&](const pt::ptree& m) {
                std::string ref = attr(m, "ref");
                try {
                    ws.merged().push_back(parse_range(ref));
                } catch (const Error&) {
                    warn("merged range with bad ref attribute: " + ref);
                }
            });
        }
    }

    LoadResult run() {
        if (!zip.contains("xl/workbook.xml"))
            throw IoError("xlsx: archive has no xl/workbook.xml");
        scan_unsupported_parts();
        load_shared_strings();
        load_styles();

        std::map<std::string, std::string> rels; // rId -> part path
        if (zip.contains("xl/_rels/workbook.xml.rels")) {
            pt::ptree doc =
                parse_xml(zip.read("xl/_rels/workbook.xml.rels"), "workbook.xml.rels");
            const pt::ptree& root = require_root(doc, "Relationships", "workbook.xml.rels");
            for_each_child(root, "Relationship", [&](const pt::ptree& rel) {
                std::string target = attr(rel, "Target");
                if (!target.empty() && target.front() == '/')
                    target.erase(0, 1);
                else
                    target = "xl/" + target;
                rels[attr(rel, "Id")] = target;
            });
        }

        pt::ptree doc = parse_xml(zip.read("xl/workbook.xml"), "workbook.xml");
        const pt::ptree& root = require_root(doc, "workbook", "workbook.xml");
        const pt::ptree* sheets = find_child(root, "sheets");
        if (!sheets) throw IoError("xlsx: workbook.xml has no sheets");

        int index = 0;
        for_each_child(*sheets, "sheet", [&](const pt::ptree& sheet) {
            ++index;
            std::string name = attr(sheet, "name", "Sheet" + std::to_string(index));
            std::string rid = attr(sheet, "id");
            std::string part;
            if (auto it = rels.find(rid); it != rels.end())
                part = it->second;
            else
                part = "xl/worksheets/sheet" + std::to_string(index) + ".xml";
            Worksheet& ws = result.workbook.add_sheet(name);
            load_sheet(ws, part);
        });

        if (const pt::ptree* names = find_child(root, "definedNames")) {
            for_each_child(*names, "definedName", [&](const pt::ptree& dn) {
                std::string name = attr(dn, "name");
                std::string text = dn.data();
                try {
                    result.workbook.defined_names()[name] = parse_range(text);
                } catch (const Error&) {
                    warn("defined name '" + name + "' is not a plain range, skipped");
                }
            });
        }

        return std::move(result);
    }
};

// ---------------------------------------------------------------------------
// Writer.

struct StyleKey {
    std::string numfmt;
    std::string fill;
    bool bold = false;
    bool italic = false;

    bool is_default() const { return numfmt.empty() && fill.empty() && !bold && !italic; }
    auto operator<=>(const StyleKey&) const = default;
};

struct Writer {
    const Workbook& wb;

    std::vector<StyleKey> xfs; // style s=1.. (0 is the default xf)
    std::map<StyleKey, int> xf_index;
    std::vector<std::string> custom_codes; // numFmtId 164..
    std::map<std::string, int> custom_index;
    std::vector<std::pair<bool, bool>> fonts{{false, false}};
    std::map<std::pair<bool, bool>, int> font_index{{{false, false}, 0}};
    std::vector<std::string> fills; // fillId 2..
    std::map<std::string, int> fill_index;
    std::vector<std::string> strings;
    std::map<std::string, int> string_index;

    explicit Writer(const Workbook& workbook) : wb(workbook) {}

    int style_for(const StyleKey& key) {
        if (auto it = xf_index.find(key); it != xf_index.end()) return it->second;
        if (!key.numfmt.empty() && builtin_format_id(key.numfmt) < 0 &&
            !custom_index.count(key.numfmt)) {
            custom_index[key.numfmt] = 164 + static_cast<int>(custom_codes.size());
            custom_codes.push_back(key.numfmt);
        }
        auto font = std::make_pair(key.bold, key.italic);
        if (!font_index.count(font)) {
            font_index[font] = static_cast<int>(fonts.size());
            fonts.push_back(font);
        }
        if (!key.fill.empty() && !fill_index.count(key.fill)) {
            fill_index[key.fill] = 2 + static_cast<int>(fills.size());
            fills.push_back(key.fill);
        }
        int index = static_cast<int>(xfs.size()) + 1;
        xf_index[key] = index;
        xfs.push_back(key);
        return index;
    }

    int string_for(const std::string& text) {
        if (auto it = string_index.find(text); it != string_index.end()) return it->second;
        int index = static_cast<int>(strings.size());
        string_index[text] = index;
        strings.push_back(text);
        return index;
    }

    std::string cell_xml(CellPos pos, const Cell& cell,
                         const std::map<CellPos, RangeRef>& spill_extents) {
        StyleKey key;
        if (cell.format) {
            key.numfmt = cell.format->number_format.value_or("");
            key.fill = cell.format->fill_argb.value_or("");
            key.bold = cell.format->bold;
            key.italic = cell.format->italic;
        }
        if (key.numfmt.empty()) key.numfmt = implicit_format(cell.value);
        int style = key.is_default() ? 0 : style_for(key);

        std::string out = "<c r=\"" + to_a1(pos) + "\"";
        if (style) out += " s=\"" + std::to_string(style) + "\"";

        const CellValue& v = cell.value;
        std::string type, value;
        if (v.is_text()) {
            if (cell.formula) {
                type = "str";
                value = xml_escape(v.as_text());
            } else {
                type = "s";
                value = std::to_string(string_for(v.as_text()));
            }
        } else if (v.is_boolean()) {
            type = "b";
            value = v.as_boolean() ? "1" : "0";
        } else if (v.is_error()) {
            type = "e";
            value = std::string(to_string(v.as_error()));
        } else if (v.is_number()) {
            value = exact_number_text(v.as_number());
        } else if (v.is_datetime()) {
            value = exact_number_text(excel_serial(v.as_datetime()));
        } else if (v.is_time()) {
            value = exact_number_text(day_fraction(v.as_time()));
        }

        if (!type.empty()) out += " t=\"" + type + "\"";
        if (!cell.formula && v.is_empty()) return out + "/>";

        out += ">";
        if (cell.formula) {
            out += "<f";
            if (auto it = spill_extents.find(pos); it != spill_extents.end())
                out += " t=\"array\" ref=\"" + to_a1(it->second, false) + "\"";
            out += ">" + xml_escape(*cell.formula) + "</f>";
        }
        if (!v.is_empty()) out += "<v>" + value + "</v>";
        out += "</c>";
        return out;
    }

    std::string sheet_xml(const Worksheet& ws) {
        // Bounding box per spill origin, so the origin's <f> can carry the
        // array ref and the reader can restore spill_origin on the slaves.
        std::map<CellPos, RangeRef> spill_extents;
        for (const auto& [pos, cell] : ws.cells()) {
            if (!cell.spill_origin) continue;
            CellPos origin = *cell.spill_origin;
            auto [it, fresh] = spill_extents.try_emplace(
                origin, RangeRef{"", CellRef{{}, origin.col, origin.row},
                                 CellRef{{}, origin.col, origin.row}});
            RangeRef& box = it->second;
            box.top_left.row = std::min(box.top_left.row, pos.row);
            box.top_left.col = std::min(box.top_left.col, pos.col);
            box.bottom_right.row = std::max(box.bottom_right.row, pos.row);
            box.bottom_right.col = std::max(box.bottom_right.col, pos.col);
        }

        std::string out = kXmlDecl;
        out += "<worksheet xmlns=\"";
        out += kNsMain;
        out += "\">";

        if (ws.cells().empty()) {
            out += "<dimension ref=\"A1\"/><sheetData/>";
        } else {
            int min_row = ws.cells().begin()->first.row;
            int max_row = ws.cells().rbegin()->first.row;
            int min_col = kMaxCol, max_col = 1;
            for (const auto& [pos, cell] : ws.cells()) {
                min_col = std::min(min_col, pos.col);
                max_col = std::max(max_col, pos.col);
            }
            out += "<dimension ref=\"" + to_a1(CellPos{min_row, min_col});
            if (max_row != min_row || max_col != min_col)
                out += ":" + to_a1(CellPos{max_row, max_col});
            out += "\"/><sheetData>";

            int current_row = 0;
            for (const auto& [pos, cell] : ws.cells()) {
                if (pos.row != current_row) {
                    if (current_row) out += "</row>";
                    out += "<row r=\"" + std::to_string(pos.row) + "\">";
                    current_row = pos.row;
                }
                out += cell_xml(pos, cell, spill_extents);
            }
            out += "</row></sheetData>";
        }

        if (!ws.merged().empty()) {
            out += "<mergeCells count=\"" + std::to_string(ws.merged().size()) + "\">";
            for (const RangeRef& range : ws.merged())
                out += "<mergeCell ref=\"" + xml_escape(to_a1(range, false)) + "\"/>";
            out += "</mergeCells>";
        }

        out += "</worksheet>";
        return out;
    }

    std::string content_types_xml() const {
        std::string out = kXmlDecl;
        out +=
            "<Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\">"
            "<Default Extension=\"rels\" ContentType=\"application/vnd.openxmlformats-"
            "package.relationships+xml\"/>"
            "<Default Extension=\"xml\" ContentType=\"application/xml\"/>"
            "<Override PartName=\"/xl/workbook.xml\" ContentType=\"application/vnd."
            "openxmlformats-officedocument.spreadsheetml.sheet.main+xml\"/>";
        for (std::size_t i = 1; i <= wb.sheets().size(); ++i) {
            out += "<Override PartName=\"/xl/worksheets/sheet" + std::to_string(i) +
                   ".xml\" ContentType=\"application/vnd.openxmlformats-officedocument."
                   "spreadsheetml.worksheet+xml\"/>";
        }
        out +=
            "<Override PartName=\"/xl/styles.xml\" ContentType=\"application/vnd."
            "openxmlformats-officedocument.spreadsheetml.styles+xml\"/>"
            "<Override PartName=\"/xl/sharedStrings.xml\" ContentType=\"application/vnd."
            "openxmlformats-officedocument.spreadsheetml.sharedStrings+xml\"/>"
            "</Types>";
        return out;
    }

    std::string workbook_xml() const {
        std::string out = kXmlDecl;
        out += "<workbook xmlns=\"";
        out += kNsMain;
        out += "\" xmlns:r=\"";
        out += kNsRel;
        out += "\"><sheets>";
        for (std::size_t i = 0; i < wb.sheets().size(); ++i) {
            out += "<sheet name=\"" + xml_escape(wb.sheets()[i].name()) + "\" sheetId=\"" +
                   std::to_string(i + 1) + "\" r:id=\"rId" + std::to_string(i + 1) + "\"/>";
        }
        out += "</sheets>";
        if (!wb.defined_names().empty()) {
            out += "<definedNames>";
            for (const auto& [name, range] : wb.defined_names()) {
                out += "<definedName name=\"" + xml_escape(name) + "\">" +
                       xml_escape(to_a1(range)) + "</definedName>";
            }
            out += "</definedNames>";
        }
        out += "</workbook>";
        return out;
    }

    std::string workbook_rels_xml() const {
        const char* base = "http://schemas.openxmlformats.org/officeDocument/2006/relationships";
        std::string out = kXmlDecl;
        out += "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/"
               "relationships\">";
        std::size_t next = 1;
        for (std::size_t i = 1; i <= wb.sheets().size(); ++i, ++next) {
            out += "<Relationship Id=\"rId" + std::to_string(next) + "\" Type=\"" + base +
                   "/worksheet\" Target=\"worksheets/sheet" + std::to_string(i) + ".xml\"/>";
        }
        out += "<Relationship Id=\"rId" + std::to_string(next) + "\" Type=\"" + base +
               "/styles\" Target=\"styles.xml\"/>";
        ++next;
        out += "<Relationship Id=\"rId" + std::to_string(next) + "\" Type=\"" + base +
               "/sharedStrings\" Target=\"sharedStrings.xml\"/>";
        out += "</Relationships>";
        return out;
    }

    std::string styles_xml() const {
        std::string out = kXmlDecl;
        out += "<styleSheet xmlns=\"";
        out += kNsMain;
        out += "\">";
        if (!custom_codes.empty()) {
            out += "<numFmts count=\"" + std::to_string(custom_codes.size()) + "\">";
            for (std::size_t i = 0; i < custom_codes.size(); ++i) {
                out += "<numFmt numFmtId=\"" + std::to_string(164 + i) + "\" formatCode=\"" +
                       xml_escape(custom_codes[i]) + "\"/>";
            }
            out += "</numFmts>";
        }
        out += "<fonts count=\"" + std::to_string(fonts.size()) + "\">";
        for (auto [bold, italic] : fonts) {
            out += "<font>";
            if (bold) out += "<b/>";
            if (italic) out += "<i/>";
            out += "<sz val=\"11\"/><name val=\"Calibri\"/></font>";
        }
        out += "</fonts>";
        out += "<fills count=\"" + std::to_string(2 + fills.size()) + "\">"
               "<fill><patternFill patternType=\"none\"/></fill>"
               "<fill><patternFill patternType=\"gray125\"/></fill>";
        for (const std::string& argb : fills) {
            out += "<fill><patternFill patternType=\"solid\"><fgColor rgb=\"" +
                   xml_escape(argb) + "\"/><bgColor indexed=\"64\"/></patternFill></fill>";
        }
        out += "</fills>";
        out += "<borders count=\"1\"><border><left/><right/><top/><bottom/><diagonal/>"
               "</border></borders>";
        out += "<cellStyleXfs count=\"1\"><xf numFmtId=\"0\" fontId=\"0\" fillId=\"0\" "
               "borderId=\"0\"/></cellStyleXfs>";
        out += "<cellXfs count=\"" + std::to_string(xfs.size() + 1) + "\">";
        out += "<xf numFmtId=\"0\" fontId=\"0\" fillId=\"0\" borderId=\"0\" xfId=\"0\"/>";
        for (const StyleKey& key : xfs) {
            int fmt_id = 0;
            if (!key.numfmt.empty()) {
                int builtin = builtin_format_id(key.numfmt);
                fmt_id = builtin >= 0 ? builtin : custom_index.at(key.numfmt);
            }
            int font_id = font_index.at({key.bold, key.italic});
            int fill_id = key.fill.empty() ? 0 : fill_index.at(key.fill);
            out += "<xf numFmtId=\"" + std::to_string(fmt_id) + "\" fontId=\"" +
                   std::to_string(font_id) + "\" fillId=\"" + std::to_string(fill_id) +
                   "\" borderId=\"0\" xfId=\"0\"";
            if (fmt_id) out += " applyNumberFormat=\"1\"";
            if (font_id) out += " applyFont=\"1\"";
            if (fill_id) out += " applyFill=\"1\"";
            out += "/>";
        }
        out += "</cellXfs></styleSheet>";
        return out;
    }

    std::string shared_strings_xml() const {
        std::string out = kXmlDecl;
        out += "<sst xmlns=\"";
        out += kNsMain;
        out += "\" count=\"" + std::to_string(strings.size()) + "\" uniqueCount=\"" +
               std::to_string(strings.size()) + "\">";
        for (const std::string& s : strings)
            out += "<si><t xml:space=\"preserve\">" + xml_escape(s) + "</t></si>";
        out += "</sst>";
        return out;
    }

    std::string run() {
        std::vector<std::string> sheet_parts;
        sheet_parts.reserve(wb.sheets().size());
        for (const Worksheet& ws : wb.sheets()) sheet_parts.push_back(sheet_xml(ws));

        ZipWriter zip;
        zip.add("[Content_Types].xml", content_types_xml());
        zip.add("_rels/.rels",
                std::string(kXmlDecl) +
                    "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/"
                    "relationships\"><Relationship Id=\"rId1\" Type=\"http://schemas."
                    "openxmlformats.org/officeDocument/2006/relationships/officeDocument\" "
                    "Target=\"xl/workbook.xml\"/></Relationships>");
        zip.add("xl/workbook.xml", workbook_xml());
        zip.add("xl/_rels/workbook.xml.rels", workbook_rels_xml());
        zip.add("xl/styles.xml", styles_xml());
        zip.add("xl/sharedStrings.xml", shared_strings_xml());
        for (std::size_t i = 0; i < sheet_parts.size(); ++i)
            zip.add("xl/worksheets/sheet" + std::to_string(i + 1) + ".xml", sheet_parts[i]);
        return zip.finish();
    }
};

} // namespace

LoadResult xlsx_load(std::string_view bytes) {
    ZipReader zip(bytes);
    Reader reader(zip);
    return reader.run();
}

std::string xlsx_save(const Workbook& workbook) {
    Writer writer(workbook);
    return writer.run();
}

LoadResult load_workbook(std::string_view bytes, FileFormat format) {
    if (format == FileFormat::ooxml) return xlsx_load(bytes);
    nlohmann::json doc = nlohmann::json::parse(bytes, nullptr, false);
    if (doc.is_discarded()) throw IoError("workbook JSON failed to parse");
    return workbook_from_json(doc);
}

std::string save_workbook(const Workbook& workbook, FileFormat format) {
    if (format == FileFormat::ooxml) return xlsx_save(workbook);
    return workbook_to_json(workbook).dump(1) + "\n";
}

FileFormat detect_format(std::string_view bytes) {
    std::size_t i = 0;
    if (bytes.size() >= 3 && bytes.substr(0, 3) == "\xef\xbb\xbf") i = 3;
    while (i < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
    if (i < bytes.size()) {
        if (bytes[i] == '{' || bytes[i] == '[') return FileFormat::json;
        if (bytes.substr(i, 2) == "PK") return FileFormat::ooxml;
    }
    throw IoError("unrecognized workbook format (expected .xlsx or workbook JSON)");
}

} // namespace sheetkit
