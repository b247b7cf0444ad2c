#include "sheetkit/a1.hpp"

#include <algorithm>
#include <cctype>

#include "sheetkit/error.hpp"

namespace sheetkit {

namespace {

bool is_col_letter(char c) { return c >= 'A' && c <= 'Z'; }

char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

bool all_digits(std::string_view s) {
    return !s.empty() &&
           std::all_of(s.begin(), s.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char take() { return text[pos++]; }
};

// Sheet prefix: either 'quoted name'! or a bare run up to '!'. Returns nullopt
// when the text has no '!' separator.
std::optional<std::string> take_sheet_prefix(Cursor& c) {
    if (c.done()) return std::nullopt;
    if (c.peek() == '\'') {
        std::size_t start = c.pos;
        c.take();
        std::string name;
        while (true) {
            if (c.done()) throw ParseError("unbalanced quote in sheet name", start);
            char ch = c.take();
            if (ch == '\'') {
                if (!c.done() && c.peek() == '\'') { // doubled quote escape
                    name.push_back('\'');
                    c.take();
                    continue;
                }
                break;
            }
            name.push_back(ch);
        }
        if (c.done() || c.take() != '!')
            throw ParseError("expected '!' after quoted sheet name", c.pos);
        if (name.empty()) throw ParseError("empty sheet name", start);
        return name;
    }
    std::size_t bang = c.text.find('!', c.pos);
    if (bang == std::string_view::npos) return std::nullopt;
    std::string name(c.text.substr(c.pos, bang - c.pos));
    if (name.empty()) throw ParseError("empty sheet name", c.pos);
    c.pos = bang + 1;
    return name;
}

struct Component {
    std::optional<int> col;
    std::optional<int> row;
    bool col_abs = false;
    bool row_abs = false;
};

Component take_component(Cursor& c) {
    Component out;
    std::size_t start = c.pos;
    bool abs1 = false;
    if (!c.done() && c.peek() == '$') {
        abs1 = true;
        c.take();
    }
    std::string letters;
    while (!c.done() && std::isalpha(static_cast<unsigned char>(c.peek())))
        letters.push_back(upper(c.take()));
    if (!letters.empty()) {
        out.col = column_from_letters(letters);
        out.col_abs = abs1;
        if (*out.col > kMaxCol)
            throw ParseError("column '" + letters + "' beyond XFD", start);
        abs1 = false;
        if (!c.done() && c.peek() == '$') {
            abs1 = true;
            c.take();
        }
    }
    std::string digits;
    while (!c.done() && std::isdigit(static_cast<unsigned char>(c.peek())))
        digits.push_back(c.take());
    if (!digits.empty()) {
        if (digits.size() > 7) throw ParseError("row '" + digits + "' out of range", start);
        int row = std::stoi(digits);
        if (row < 1 || row > kMaxRow) throw ParseError("row '" + digits + "' out of range", start);
        out.row = row;
        out.row_abs = abs1;
    } else if (abs1 && out.col.has_value()) {
        throw ParseError("'$' not followed by a row", c.pos);
    }
    if (!out.col && !out.row) throw ParseError("expected cell reference", start);
    return out;
}

} // namespace

std::string column_letters(int col) {
    std::string out;
    while (col > 0) {
        int rem = (col - 1) % 26;
        out.insert(out.begin(), static_cast<char>('A' + rem));
        col = (col - 1) / 26;
    }
    return out;
}

int column_from_letters(std::string_view letters) {
    int col = 0;
    for (char ch : letters) {
        char u = upper(ch);
        if (!is_col_letter(u)) throw ParseError(std::string("invalid column letter '") + ch + "'", 0);
        col = col * 26 + (u - 'A' + 1);
    }
    return col;
}

void RangeRef::normalize() {
    if (top_left.col > bottom_right.col) {
        std::swap(top_left.col, bottom_right.col);
        std::swap(top_left.col_absolute, bottom_right.col_absolute);
    }
    if (top_left.row > bottom_right.row) {
        std::swap(top_left.row, bottom_right.row);
        std::swap(top_left.row_absolute, bottom_right.row_absolute);
    }
}

bool RangeRef::intersects(const RangeRef& other) const {
    return top_left.col <= other.bottom_right.col && other.top_left.col <= bottom_right.col &&
           top_left.row <= other.bottom_right.row && other.top_left.row <= bottom_right.row;
}

RangeRef RangeRef::single(std::string sheet, int row, int col) {
    RangeRef r;
    r.sheet = std::move(sheet);
    r.top_left.row = r.bottom_right.row = row;
    r.top_left.col = r.bottom_right.col = col;
    return r;
}

A1Target parse_a1(std::string_view text) {
    if (text.empty()) throw ParseError("empty reference", 0);
    Cursor c{text};
    std::optional<std::string> sheet = take_sheet_prefix(c);

    Component first = take_component(c);
    bool is_range = !c.done() && c.peek() == ':';
    if (!is_range) {
        if (!c.done())
            throw ParseError("unexpected trailing text '" + std::string(c.text.substr(c.pos)) + "'",
                             c.pos);
        if (!first.col || !first.row)
            throw ParseError("single reference must name both column and row", 0);
        CellRef ref;
        ref.sheet = sheet;
        ref.col = *first.col;
        ref.row = *first.row;
        ref.col_absolute = first.col_abs;
        ref.row_absolute = first.row_abs;
        return ref;
    }

    c.take(); // ':'
    Component second = take_component(c);
    if (!c.done())
        throw ParseError("unexpected trailing text '" + std::string(c.text.substr(c.pos)) + "'",
                         c.pos);

    // Both sides must agree on shape: A1:B2, A:B, or 1:3.
    if (first.col.has_value() != second.col.has_value() ||
        first.row.has_value() != second.row.has_value())
        throw ParseError("mismatched range endpoints", 0);

    RangeRef range;
    range.sheet = sheet.value_or("");
    if (!first.row) { // whole columns
        range.whole_col = true;
        range.top_left = {std::nullopt, *first.col, 1, first.col_abs, false};
        range.bottom_right = {std::nullopt, *second.col, kMaxRow, second.col_abs, false};
    } else if (!first.col) { // whole rows
        range.whole_row = true;
        range.top_left = {std::nullopt, 1, *first.row, false, first.row_abs};
        range.bottom_right = {std::nullopt, kMaxCol, *second.row, false, second.row_abs};
    } else {
        range.top_left = {std::nullopt, *first.col, *first.row, first.col_abs, first.row_abs};
        range.bottom_right = {std::nullopt, *second.col, *second.row, second.col_abs, second.row_abs};
    }
    range.normalize();
    return range;
}

RangeRef parse_range(std::string_view text) {
    A1Target target = parse_a1(text);
    if (auto* range = std::get_if<RangeRef>(&target)) return *range;
    const CellRef& ref = std::get<CellRef>(target);
    RangeRef r;
    r.sheet = ref.sheet.value_or("");
    r.top_left = r.bottom_right = ref;
    r.top_left.sheet.reset();
    r.bottom_right.sheet.reset();
    return r;
}

std::string sheet_prefix(std::string_view sheet) {
    bool needs_quotes = sheet.empty();
    for (char ch : sheet) {
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '.')
            needs_quotes = true;
    }
    // A bare all-digit name would parse as a row number.
    if (all_digits(sheet)) needs_quotes = true;
    if (!needs_quotes) return std::string(sheet) + "!";
    std::string out = "'";
    for (char ch : sheet) {
        out.push_back(ch);
        if (ch == '\'') out.push_back('\'');
    }
    out += "'!";
    return out;
}

std::string to_a1(const CellRef& ref, bool with_sheet) {
    std::string out;
    if (with_sheet && ref.sheet) out += sheet_prefix(*ref.sheet);
    if (ref.col_absolute) out += '$';
    out += column_letters(ref.col);
    if (ref.row_absolute) out += '$';
    out += std::to_string(ref.row);
    return out;
}

std::string to_a1(CellPos pos) { return column_letters(pos.col) + std::to_string(pos.row); }

std::string to_a1(const RangeRef& range, bool with_sheet) {
    std::string out;
    if (with_sheet && !range.sheet.empty()) out += sheet_prefix(range.sheet);
    auto corner = [&](const CellRef& ref) {
        if (range.whole_col) {
            if (ref.col_absolute) out += '$';
            out += column_letters(ref.col);
        } else if (range.whole_row) {
            if (ref.row_absolute) out += '$';
            out += std::to_string(ref.row);
        } else {
            out += to_a1(ref, false);
        }
    };
    corner(range.top_left);
    if (!(range.top_left.col == range.bottom_right.col &&
          range.top_left.row == range.bottom_right.row &&
          range.top_left.col_absolute == range.bottom_right.col_absolute &&
          range.top_left.row_absolute == range.bottom_right.row_absolute) ||
        range.whole_col || range.whole_row) {
        out += ':';
        corner(range.bottom_right);
    }
    return out;
}

} // namespace sheetkit
