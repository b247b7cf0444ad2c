#include "sheetkit/verify/verifier.hpp"

#include <algorithm>

#include <json.hpp>
#include "sheetkit/error.hpp"
#include "sheetkit/formula/engine.hpp"
#include "sheetkit/formula/parser.hpp"
#include "sheetkit/formula/printer.hpp"
#include "sheetkit/io.hpp"
#include "sheetkit/verify/normalize.hpp"

using json = nlohmann::json;

namespace sheetkit::verify {

namespace {

constexpr std::size_t kMaxDiagnostics = 1000;

void add_diagnostic(MatchReport& report, CellDiagnostic d) {
    ++report.mismatches;
    if (report.diagnostics.size() < kMaxDiagnostics) report.diagnostics.push_back(std::move(d));
}

/// Canonical formula text for AST-level comparison; parse failures fall back
/// to the raw body so garbage still compares by exact text.
std::string canonical_formula(const std::string& body) {
    try {
        return formula::print_formula(*formula::parse_formula(body));
    } catch (const Error&) {
        return body;
    }
}

bool formulas_equivalent(const Cell* pred, const Cell* oracle) {
    const bool pf = pred && pred->formula.has_value();
    const bool of = oracle && oracle->formula.has_value();
    if (pf != of) return false;
    if (!pf) return true;
    return canonical_formula(*pred->formula) == canonical_formula(*oracle->formula);
}

} // namespace

MatchReport allcellsmatch(const Workbook& pred, const Workbook& oracle,
                          const std::vector<RangeRef>& regions, const TaskOptions& options) {
    MatchReport report;
    report.match = true;
    for (RangeRef region : regions) {
        region.normalize();
        const Worksheet* os = oracle.sheet(region.sheet);
        if (!os) throw Error("oracle lacks region sheet: " + region.sheet);
        const Worksheet* ps = pred.sheet(region.sheet);
        if (!ps) {
            report.match = false;
            add_diagnostic(report, {to_a1(region), "sheet " + region.sheet, "absent",
                                    "missing sheet"});
            continue;
        }

        // Whole-row/column regions only need scanning out to the populated
        // extent of either sheet; beyond it both sides are Empty.
        int row_end = region.bottom_right.row;
        int col_end = region.bottom_right.col;
        if (region.whole_col) row_end = std::max(
            {region.top_left.row, ps->max_row(), os->max_row()});
        if (region.whole_row) col_end = std::max(
            {region.top_left.col, ps->max_col(), os->max_col()});

        for (int r = region.top_left.row; r <= row_end; ++r) {
            for (int c = region.top_left.col; c <= col_end; ++c) {
                const CellPos pos{r, c};
                const NormalizedValue want = normalize_cell(os->value_at(pos));
                const NormalizedValue got = normalize_cell(ps->value_at(pos));
                const std::string address = sheet_prefix(region.sheet) + to_a1(pos);
                if (!cells_match(got, want, options.numeric_tolerance)) {
                    report.match = false;
                    add_diagnostic(report, {address, to_string(want), to_string(got), ""});
                } else if (options.compare_formulas &&
                           !formulas_equivalent(ps->find(pos), os->find(pos))) {
                    report.match = false;
                    add_diagnostic(report, {address, to_string(want), to_string(got),
                                            "formula mismatch"});
                }
            }
        }
    }
    return report;
}

RewardResult score_workbook(Workbook& pred, const TaskSpec& task) {
    RewardResult result;
    try {
        formula::recalculate(pred);
    } catch (const Error&) {
        result.reason = "no_valid_output";
        return result;
    }
    result.report = allcellsmatch(pred, task.oracle, task.regions, task.options);
    result.reward = result.report.match ? 1 : 0;
    return result;
}

RewardResult compute_reward(const std::optional<std::string>& workbook_bytes,
                            const TaskSpec& task) {
    if (!workbook_bytes) {
        RewardResult result;
        result.reason = "no_valid_output";
        return result;
    }
    Workbook pred;
    try {
        pred = load_workbook(*workbook_bytes, detect_format(*workbook_bytes)).workbook;
    } catch (const Error&) {
        RewardResult result;
        result.reason = "no_valid_output";
        return result;
    }
    return score_workbook(pred, task);
}

std::string reward_json(const RewardResult& r) {
    json diags = json::array();
    for (const CellDiagnostic& d : r.report.diagnostics) {
        json entry{{"address", d.address}, {"expected", d.expected}, {"actual", d.actual}};
        if (!d.note.empty()) entry["note"] = d.note;
        diags.push_back(std::move(entry));
    }
    json doc{{"reward", r.reward},
             {"match", r.report.match},
             {"mismatches", r.report.mismatches},
             {"diagnostics", std::move(diags)}};
    if (!r.reason.empty()) doc["reason"] = r.reason;
    return doc.dump();
}

} // namespace sheetkit::verify
