#pragma once

#include <chrono>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sheetkit/formula/ast.hpp"
#include "sheetkit/workbook.hpp"

namespace sheetkit::formula {

/// Row-major value matrix, the shape dynamic-array results take.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<CellValue> cells;

    static Matrix sized(int rows, int cols) {
        return Matrix{rows, cols, std::vector<CellValue>(
                                      static_cast<std::size_t>(rows) * cols)};
    }
    CellValue& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
    const CellValue& at(int r, int c) const {
        return cells[static_cast<std::size_t>(r) * cols + c];
    }
};

using EvalResult = std::variant<CellValue, Matrix>;

struct EvalContext {
    const Workbook* workbook = nullptr;
    /// Sheet the formula lives on; what a sheet-less reference means.
    std::string home_sheet;
    CellPos current{1, 1};
    /// What TODAY() returns — injected so recalculation is reproducible.
    DateTime today{};
    /// Re-entrancy guard: evaluation of a cell already in the set yields
    /// #CIRC! instead of recursing.
    std::set<std::pair<std::string, CellPos>>* guard = nullptr;
};

/// Evaluates an AST against the workbook's cached cell values. References
/// read caches only — ordering freshness is recalculate()'s job.
EvalResult evaluate(const Expr& ast, EvalContext& ctx);

/// A reference argument resolved against the workbook: the target sheet plus
/// a normalized range. Whole-row/column extents are clamped to the sheet's
/// used area, and oversized finite ranges shrink toward it too. `sheet` is
/// null when the named sheet does not exist.
struct ResolvedRange {
    const Worksheet* sheet = nullptr;
    RangeRef range;
};

/// Resolves a Ref or Range expression; nullopt for any other node kind.
std::optional<ResolvedRange> resolve_range(const Expr& e, EvalContext& ctx);

/// Collapses an evaluation result into one value: 1x1 matrices unwrap,
/// larger matrices are a #VALUE! (no implicit intersection).
CellValue scalarize(const EvalResult& r);

struct RecalcReport {
    /// Each detected reference cycle, as sorted sheet-qualified addresses.
    std::vector<std::vector<std::string>> cycles;
    int passes = 0;
    int cells_evaluated = 0;
    /// False only if spill interactions failed to reach a fixed point within
    /// the pass budget (pathological self-extending spills).
    bool converged = true;
};

struct RecalcOptions {
    /// TODAY()'s date; defaults to the current UTC date.
    std::optional<DateTime> today;
    /// Cooperative cutoff: recalculation checks it periodically and throws
    /// Error when exceeded.
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Full-workbook recalculation in place: parses formulas, extracts cycles
/// (members get #CIRC!), evaluates the rest in dependency order, applies
/// dynamic-array spill, and re-runs until values are stable when a spill
/// lands under an earlier read.
RecalcReport recalculate(Workbook& wb, const RecalcOptions& opts = {});

} // namespace sheetkit::formula
