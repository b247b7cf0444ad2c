#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sheetkit {

// Minimal ZIP container, enough for OOXML packages: stored and deflated
// entries, no ZIP64, no encryption. Writing is deterministic (fixed
// timestamps, entries in insertion order) so identical archives are
// byte-identical.

struct ZipEntry {
    std::string name;
    std::string data;
};

class ZipReader {
public:
    /// Parses the central directory. Throws IoError on anything malformed.
    explicit ZipReader(std::string_view bytes);

    const std::vector<std::string>& names() const { return names_; }
    bool contains(std::string_view name) const;
    /// Inflates and CRC-checks the entry. Throws IoError if absent or corrupt.
    std::string read(std::string_view name) const;

private:
    struct Record {
        std::string name;
        std::uint16_t method;
        std::uint32_t crc32;
        std::uint64_t compressed_size;
        std::uint64_t uncompressed_size;
        std::uint64_t local_offset;
    };

    std::string_view bytes_;
    std::vector<Record> records_;
    std::vector<std::string> names_;
};

class ZipWriter {
public:
    void add(std::string name, std::string_view data);
    /// Assembles the archive; the writer is left empty.
    std::string finish();

private:
    struct Pending {
        std::string name;
        std::string compressed;
        std::uint16_t method;
        std::uint32_t crc32;
        std::uint64_t uncompressed_size;
        std::uint64_t local_offset;
    };
    std::vector<Pending> entries_;
};

} // namespace sheetkit
