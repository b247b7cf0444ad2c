#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace sheetkit {

// OOXML grid limits.
inline constexpr int kMaxRow = 1'048'576;
inline constexpr int kMaxCol = 16'384; // column XFD

/// Plain grid coordinate, 1-based. Worksheet storage key; row-major ordering.
struct CellPos {
    int row = 1;
    int col = 1;

    auto operator<=>(const CellPos&) const = default;
};

struct CellRef {
    std::optional<std::string> sheet;
    int col = 1; // 1-based
    int row = 1; // 1-based
    bool col_absolute = false;
    bool row_absolute = false;

    CellPos pos() const { return {row, col}; }

    bool operator==(const CellRef&) const = default;
};

/// Rectangular range. `whole_col` / `whole_row` mark A:B / 1:3 style ranges
/// whose open axis spans the full grid; they round-trip through text as such.
struct RangeRef {
    std::string sheet; // empty when unqualified
    CellRef top_left;
    CellRef bottom_right;
    bool whole_col = false;
    bool whole_row = false;

    /// Swap corners so top_left <= bottom_right on both axes.
    void normalize();

    int height() const { return bottom_right.row - top_left.row + 1; }
    int width() const { return bottom_right.col - top_left.col + 1; }
    std::int64_t area() const {
        return static_cast<std::int64_t>(height()) * static_cast<std::int64_t>(width());
    }
    bool contains(int row, int col) const {
        return row >= top_left.row && row <= bottom_right.row && col >= top_left.col &&
               col <= bottom_right.col;
    }
    bool contains(CellPos p) const { return contains(p.row, p.col); }
    bool intersects(const RangeRef& other) const;

    static RangeRef single(std::string sheet, int row, int col);

    bool operator==(const RangeRef&) const = default;
};

using A1Target = std::variant<CellRef, RangeRef>;

/// Parse "D1", "$B$3:C5", "Sheet2!D1", "'My Sheet'!A1:B2", "A:B", "2:4".
/// Throws ParseError naming the offending token.
A1Target parse_a1(std::string_view text);

/// parse_a1 restricted to ranges: single-cell text yields the 1x1 range.
RangeRef parse_range(std::string_view text);

std::string column_letters(int col); // 1 -> "A", 28 -> "AB"
int column_from_letters(std::string_view letters);

std::string to_a1(const CellRef& ref, bool with_sheet = true);
std::string to_a1(const RangeRef& range, bool with_sheet = true);
std::string to_a1(CellPos pos);

/// Sheet prefix for A1 text, including the '!' and quoting the name when
/// needed ("My Sheet" -> "'My Sheet'!").
std::string sheet_prefix(std::string_view sheet);

} // namespace sheetkit
