#pragma once

#include <filesystem>
#include <string>

#include "sheetkit/util.hpp"

namespace testutil {

/// Unique scratch directory, recursively deleted on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sheetkit-test-" + sheetkit::token_hex(8));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    operator const std::filesystem::path&() const { return path; }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

} // namespace testutil
