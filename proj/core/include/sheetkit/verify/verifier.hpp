#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sheetkit/verify/task.hpp"
#include "sheetkit/workbook.hpp"

namespace sheetkit::verify {

struct CellDiagnostic {
    std::string address;  ///< "Sheet1!D1"
    std::string expected; ///< normalized oracle value, rendered
    std::string actual;   ///< normalized prediction value, rendered
    std::string note;     ///< "", "missing sheet", or "formula mismatch"
};

struct MatchReport {
    bool match = false;
    /// Total mismatching cells; diagnostics list the first 1000 of them.
    int mismatches = 0;
    std::vector<CellDiagnostic> diagnostics;
};

/// Cell-level comparison over the manipulation regions. Both workbooks must
/// already be recalculated (cached values are compared). A region sheet
/// missing from pred yields match=false with a "missing sheet" diagnostic;
/// missing from oracle it throws (task invariant).
MatchReport allcellsmatch(const Workbook& pred, const Workbook& oracle,
                          const std::vector<RangeRef>& regions, const TaskOptions& options = {});

struct RewardResult {
    int reward = 0;
    /// "no_valid_output" when no workbook was produced or it failed to
    /// load/recalculate; empty otherwise.
    std::string reason;
    MatchReport report;
};

/// Binary outcome reward. nullopt or unloadable bytes -> 0 with reason
/// no_valid_output; otherwise the prediction is loaded (format detected),
/// recalculated, and compared region-by-region against the task oracle.
RewardResult compute_reward(const std::optional<std::string>& workbook_bytes,
                            const TaskSpec& task);

/// Same, for an already-loaded prediction; recalculates it in place.
RewardResult score_workbook(Workbook& pred, const TaskSpec& task);

/// Stable JSON rendering ({"reward", "reason", "match", "diagnostics": [...]})
/// for the CLI and the job service.
std::string reward_json(const RewardResult& r);

} // namespace sheetkit::verify
