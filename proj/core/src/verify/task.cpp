#include "sheetkit/verify/task.hpp"

#include <algorithm>

#include <json.hpp>
#include "sheetkit/error.hpp"
#include "sheetkit/formula/engine.hpp"
#include "sheetkit/io.hpp"
#include "sheetkit/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace sheetkit::verify {

TaskSpec load_task(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("task directory not found: " + dir.string());
    const fs::path spec_path = dir / "spec.json";
    const fs::path oracle_path = dir / "oracle.xlsx";
    const fs::path instruction_path = dir / "instruction.md";
    const fs::path initial_dir = dir / "initial";
    if (!fs::exists(spec_path)) throw Error("task is missing spec.json: " + dir.string());
    if (!fs::exists(oracle_path)) throw Error("task is missing oracle.xlsx: " + dir.string());
    if (!fs::is_directory(initial_dir)) throw Error("task is missing initial/: " + dir.string());

    TaskSpec task;
    json spec;
    try {
        spec = json::parse(read_file(spec_path));
    } catch (const json::exception& e) {
        throw Error("bad spec.json: " + std::string(e.what()));
    }
    task.task_id = spec.value("task_id", dir.filename().string());
    if (fs::exists(instruction_path)) task.instruction = read_file(instruction_path);

    if (!spec.contains("regions") || !spec["regions"].is_array() || spec["regions"].empty())
        throw Error("spec.json needs a nonempty regions array");
    for (const json& r : spec["regions"]) {
        RangeRef range = parse_range(r.get<std::string>());
        if (range.sheet.empty()) throw Error("region must be sheet-qualified: " + r.dump());
        range.normalize();
        task.regions.push_back(std::move(range));
    }
    task.options.compare_formulas = spec.value("compare_formulas", false);
    task.options.numeric_tolerance = spec.value("numeric_tolerance", 0.0);

    // Seed files: data.xlsx (or the only file) is the initial workbook.
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(initial_dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error("task has no initial files: " + dir.string());
    bool has_named = std::any_of(files.begin(), files.end(),
                                 [](const fs::path& p) { return p.filename() == "data.xlsx"; });
    if (!has_named && files.size() != 1)
        throw Error("ambiguous initial workbook (no data.xlsx among several files)");
    for (const fs::path& p : files) {
        SeedFile seed;
        seed.name = p.filename().string();
        seed.bytes = read_file(p);
        seed.initial_workbook = has_named ? (p.filename() == "data.xlsx") : true;
        task.seeds.push_back(std::move(seed));
    }

    const std::string oracle_bytes = read_file(oracle_path);
    task.oracle = load_workbook(oracle_bytes, detect_format(oracle_bytes)).workbook;
    formula::recalculate(task.oracle);

    for (const RangeRef& region : task.regions) {
        if (!task.oracle.sheet(region.sheet))
            throw Error("oracle lacks region sheet: " + region.sheet);
    }
    return task;
}

} // namespace sheetkit::verify
