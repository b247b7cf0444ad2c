#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sheetkit/a1.hpp"
#include "sheetkit/workbook.hpp"
#include "sheetkit/workspace.hpp"

namespace sheetkit::verify {

struct TaskOptions {
    /// Absolute tolerance applied after 2-dp rounding; 0 means exact.
    double numeric_tolerance = 0.0;
    /// Additionally require formula equivalence (AST equality) inside regions.
    bool compare_formulas = false;
};

struct TaskSpec {
    std::string task_id;
    std::string instruction;
    /// Files to seed a rollout workspace with; the initial workbook is
    /// flagged and lands as data.xlsx.
    std::vector<SeedFile> seeds;
    /// Recalculated at load so comparisons read settled cached values.
    Workbook oracle;
    /// Manipulation regions compared for the reward; nonempty.
    std::vector<RangeRef> regions;
    TaskOptions options;
};

/// Loads a task directory:
///   instruction.md   natural-language task statement
///   initial/         seed files; the one named data.xlsx — or the only
///                    file — is the initial workbook
///   oracle.xlsx      expected final workbook
///   spec.json        {"task_id", "regions": ["Sheet!A1:B2", ...],
///                     "compare_formulas"?, "numeric_tolerance"?}
/// Throws Error on layout problems, empty regions, or a region naming a
/// sheet the oracle lacks.
TaskSpec load_task(const std::filesystem::path& dir);

} // namespace sheetkit::verify
