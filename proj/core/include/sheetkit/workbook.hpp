#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sheetkit/a1.hpp"
#include "sheetkit/value.hpp"

namespace sheetkit {

/// Formatting attributes the model tracks: number format code, solid fill
/// color (ARGB hex), and the two font flags. Richer styling is out of scope.
struct CellFormat {
    std::optional<std::string> number_format;
    std::optional<std::string> fill_argb;
    bool bold = false;
    bool italic = false;

    bool is_default() const {
        return !number_format && !fill_argb && !bold && !italic;
    }

    bool operator==(const CellFormat&) const = default;
};

struct Cell {
    /// Cached value, post-recalculation. Authoritative when no formula is set.
    CellValue value;
    /// Formula body without the leading '='.
    std::optional<std::string> formula;
    std::optional<CellFormat> format;
    /// Set when the value was produced by a dynamic-array formula spilling
    /// from another cell; such a cell carries no formula text of its own.
    std::optional<CellPos> spill_origin;

    bool has_content() const {
        return formula.has_value() || !value.is_empty();
    }

    bool operator==(const Cell&) const = default;
};

class Worksheet {
public:
    Worksheet() = default;
    explicit Worksheet(std::string name) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }

    const std::map<CellPos, Cell>& cells() const { return cells_; }
    std::map<CellPos, Cell>& cells() { return cells_; }

    const Cell* find(CellPos pos) const;
    Cell* find(CellPos pos);
    /// Value at pos; Empty for unpopulated cells.
    CellValue value_at(CellPos pos) const;
    /// Get-or-create.
    Cell& at(CellPos pos) { return cells_[pos]; }

    void set_value(CellPos pos, CellValue value);
    void set_formula(CellPos pos, std::string body);
    void erase(CellPos pos) { cells_.erase(pos); }

    std::vector<RangeRef>& merged() { return merged_; }
    const std::vector<RangeRef>& merged() const { return merged_; }

    // Extents over populated cells and merged ranges; 0 when the sheet is empty.
    int max_row() const;
    int max_col() const;

    bool operator==(const Worksheet&) const = default;

private:
    std::string name_;
    std::map<CellPos, Cell> cells_; // sparse, row-major ordering
    std::vector<RangeRef> merged_;
};

class Workbook {
public:
    std::vector<Worksheet>& sheets() { return sheets_; }
    const std::vector<Worksheet>& sheets() const { return sheets_; }

    /// Case-insensitive lookup; insertion order is preserved in sheets().
    Worksheet* sheet(std::string_view name);
    const Worksheet* sheet(std::string_view name) const;

    /// Throws Error when the name (case-insensitively) already exists.
    Worksheet& add_sheet(std::string name);

    std::map<std::string, RangeRef>& defined_names() { return defined_names_; }
    const std::map<std::string, RangeRef>& defined_names() const { return defined_names_; }

    bool operator==(const Workbook&) const = default;

private:
    std::vector<Worksheet> sheets_;
    std::map<std::string, RangeRef> defined_names_;
};

/// Case-insensitive ASCII string equality (sheet-name comparison rule).
bool sheet_name_equal(std::string_view a, std::string_view b);

} // namespace sheetkit
