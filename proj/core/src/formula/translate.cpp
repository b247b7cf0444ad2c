#include "sheetkit/formula/translate.hpp"

#include <algorithm>

#include "sheetkit/formula/parser.hpp"
#include "sheetkit/formula/printer.hpp"
#include "sheetkit/workbook.hpp"

namespace sheetkit::formula {

namespace {

ExprPtr ref_error() {
    return make_expr(Literal{CellValue::error(ErrorCode::Ref)});
}

bool shift_ref(CellRef& ref, int d_row, int d_col) {
    int row = ref.row_absolute ? ref.row : ref.row + d_row;
    int col = ref.col_absolute ? ref.col : ref.col + d_col;
    if (row < 1 || row > kMaxRow || col < 1 || col > kMaxCol) return false;
    ref.row = row;
    ref.col = col;
    return true;
}

template <typename RefFn, typename RangeFn>
ExprPtr rewrite(const Expr& e, const RefFn& on_ref, const RangeFn& on_range) {
    struct Visitor {
        const RefFn& on_ref;
        const RangeFn& on_range;

        ExprPtr operator()(const Literal& l) const { return make_expr(Literal{l.value}); }
        ExprPtr operator()(const Ref& r) const { return on_ref(r.ref); }
        ExprPtr operator()(const Range& r) const { return on_range(r.range); }
        ExprPtr operator()(const Unary& u) const {
            return make_expr(Unary{u.op, rewrite(*u.child, on_ref, on_range)});
        }
        ExprPtr operator()(const Binary& b) const {
            return make_expr(Binary{b.op, rewrite(*b.left, on_ref, on_range),
                                    rewrite(*b.right, on_ref, on_range)});
        }
        ExprPtr operator()(const Call& c) const {
            Call copy{c.name, {}};
            copy.args.reserve(c.args.size());
            for (const ExprPtr& arg : c.args)
                copy.args.push_back(rewrite(*arg, on_ref, on_range));
            return make_expr(std::move(copy));
        }
        ExprPtr operator()(const ArrayLit& a) const { return make_expr(ArrayLit{a.rows}); }
    };
    return std::visit(Visitor{on_ref, on_range}, e.node);
}

} // namespace

ExprPtr translate_references(const Expr& e, int d_row, int d_col) {
    auto on_ref = [&](const CellRef& ref) -> ExprPtr {
        CellRef shifted = ref;
        if (!shift_ref(shifted, d_row, d_col)) return ref_error();
        return make_expr(Ref{shifted});
    };
    auto on_range = [&](const RangeRef& range) -> ExprPtr {
        RangeRef shifted = range;
        // Whole-column refs have no row identity to shift, and vice versa.
        int dr = shifted.whole_col ? 0 : d_row;
        int dc = shifted.whole_row ? 0 : d_col;
        if (!shift_ref(shifted.top_left, dr, dc) || !shift_ref(shifted.bottom_right, dr, dc))
            return ref_error();
        return make_expr(Range{shifted});
    };
    return rewrite(e, on_ref, on_range);
}

std::string translate_formula(std::string_view body, int d_row, int d_col) {
    return print_formula(*translate_references(*parse_formula(body), d_row, d_col));
}

ExprPtr adjust_for_structural_delete(const Expr& e, std::string_view sheet, Axis axis,
                                     const std::vector<int>& deleted,
                                     std::string_view home_sheet) {
    std::vector<int> dels(deleted);
    std::sort(dels.begin(), dels.end());
    dels.erase(std::unique(dels.begin(), dels.end()), dels.end());

    auto removed = [&](int index) {
        return std::binary_search(dels.begin(), dels.end(), index);
    };
    auto count_before = [&](int index) {
        return static_cast<int>(std::lower_bound(dels.begin(), dels.end(), index) - dels.begin());
    };
    auto targets = [&](const std::optional<std::string>& ref_sheet) {
        std::string_view target = ref_sheet ? std::string_view(*ref_sheet) : home_sheet;
        return sheet_name_equal(target, sheet);
    };

    auto on_ref = [&](const CellRef& ref) -> ExprPtr {
        if (!targets(ref.sheet)) return make_expr(Ref{ref});
        CellRef out = ref;
        int& index = axis == Axis::rows ? out.row : out.col;
        if (removed(index)) return ref_error();
        index -= count_before(index);
        return make_expr(Ref{out});
    };
    auto on_range = [&](const RangeRef& range) -> ExprPtr {
        std::optional<std::string> range_sheet;
        if (!range.sheet.empty()) range_sheet = range.sheet;
        if (!targets(range_sheet)) return make_expr(Range{range});
        RangeRef out = range;
        // A whole-column range is untouched by row deletion (it spans every
        // row either way), and symmetrically for whole rows.
        if ((axis == Axis::rows && out.whole_col) || (axis == Axis::cols && out.whole_row))
            return make_expr(Range{out});
        int& lo = axis == Axis::rows ? out.top_left.row : out.top_left.col;
        int& hi = axis == Axis::rows ? out.bottom_right.row : out.bottom_right.col;
        // First and last surviving indices inside the span.
        int new_lo = lo;
        while (new_lo <= hi && removed(new_lo)) ++new_lo;
        if (new_lo > hi) return ref_error();
        int new_hi = hi;
        while (removed(new_hi)) --new_hi;
        lo = new_lo - count_before(new_lo);
        hi = new_hi - count_before(new_hi);
        if (out.area() == 1 && !out.whole_col && !out.whole_row) {
            CellRef single = out.top_left;
            if (!out.sheet.empty()) single.sheet = out.sheet;
            return make_expr(Ref{single});
        }
        return make_expr(Range{out});
    };
    return rewrite(e, on_ref, on_range);
}

} // namespace sheetkit::formula
