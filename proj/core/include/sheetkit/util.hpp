#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sheetkit {

/// SHA-256 of the bytes, as 64 lowercase hex chars.
std::string sha256_hex(std::string_view data);

/// Cryptographically random token of `bytes` random bytes, hex-encoded.
std::string token_hex(std::size_t bytes = 8);

/// Milliseconds since the Unix epoch.
std::int64_t now_millis();

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

/// Writes to a sibling temp file then renames over the target, so readers
/// never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

} // namespace sheetkit
