#include "sheetkit/workbook.hpp"

#include <algorithm>
#include <cctype>

#include "sheetkit/error.hpp"

namespace sheetkit {

bool sheet_name_equal(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

const Cell* Worksheet::find(CellPos pos) const {
    auto it = cells_.find(pos);
    return it == cells_.end() ? nullptr : &it->second;
}

Cell* Worksheet::find(CellPos pos) {
    auto it = cells_.find(pos);
    return it == cells_.end() ? nullptr : &it->second;
}

CellValue Worksheet::value_at(CellPos pos) const {
    const Cell* cell = find(pos);
    return cell ? cell->value : CellValue::empty();
}

void Worksheet::set_value(CellPos pos, CellValue value) {
    Cell& cell = cells_[pos];
    cell.value = std::move(value);
    cell.formula.reset();
    cell.spill_origin.reset();
}

void Worksheet::set_formula(CellPos pos, std::string body) {
    if (!body.empty() && body.front() == '=') body.erase(body.begin());
    Cell& cell = cells_[pos];
    cell.formula = std::move(body);
    cell.spill_origin.reset();
}

int Worksheet::max_row() const {
    int r = cells_.empty() ? 0 : cells_.rbegin()->first.row;
    for (const RangeRef& m : merged_) r = std::max(r, m.bottom_right.row);
    return r;
}

int Worksheet::max_col() const {
    int c = 0;
    for (const auto& [pos, cell] : cells_) c = std::max(c, pos.col);
    for (const RangeRef& m : merged_) c = std::max(c, m.bottom_right.col);
    return c;
}

Worksheet* Workbook::sheet(std::string_view name) {
    for (Worksheet& s : sheets_)
        if (sheet_name_equal(s.name(), name)) return &s;
    return nullptr;
}

const Worksheet* Workbook::sheet(std::string_view name) const {
    for (const Worksheet& s : sheets_)
        if (sheet_name_equal(s.name(), name)) return &s;
    return nullptr;
}

Worksheet& Workbook::add_sheet(std::string name) {
    if (sheet(name)) throw Error("duplicate sheet name '" + name + "'");
    sheets_.emplace_back(std::move(name));
    return sheets_.back();
}

} // namespace sheetkit
