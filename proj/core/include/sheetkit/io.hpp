#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sheetkit/workbook.hpp"

namespace sheetkit {

enum class FileFormat {
    ooxml, // .xlsx
    json,  // canonical JSON workbook (see docs/WORKBOOK_JSON.md)
};

struct LoadResult {
    Workbook workbook;
    /// Unsupported file features that were skipped (charts, pivot caches, ...).
    std::vector<std::string> warnings;
};

/// Throws IoError on corrupt input. Unsupported features downgrade to warnings.
LoadResult load_workbook(std::string_view bytes, FileFormat format);
std::string save_workbook(const Workbook& workbook, FileFormat format);

/// xlsx files start with the ZIP magic; everything else here is JSON.
FileFormat detect_format(std::string_view bytes);

} // namespace sheetkit
