#include "sheetkit/zip.hpp"

#include <zlib.h>

#include <cstring>
#include <limits>

#include "sheetkit/error.hpp"

namespace sheetkit {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEocdSig = 0x06054b50;

constexpr std::uint16_t kMethodStore = 0;
constexpr std::uint16_t kMethodDeflate = 8;

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

    std::uint16_t u16() { return static_cast<std::uint16_t>(u8() | (u8() << 8)); }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::string_view take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw IoError("zip: truncated archive");
        std::string_view out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    void skip(std::size_t n) { take(n); }
    std::size_t pos() const { return pos_; }

private:
    std::uint32_t u8() {
        if (pos_ >= bytes_.size()) throw IoError("zip: truncated archive");
        return static_cast<unsigned char>(bytes_[pos_++]);
    }

    std::string_view bytes_;
    std::size_t pos_;
};

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string inflate_raw(std::string_view data, std::uint64_t expected_size) {
    std::string out;
    out.resize(expected_size);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw IoError("zip: inflateInit failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected_size)
        throw IoError("zip: entry failed to inflate");
    return out;
}

std::string deflate_raw(std::string_view data) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("zip: deflateInit failed");
    std::string out;
    out.resize(deflateBound(&zs, static_cast<uLong>(data.size())));
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    std::size_t produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw IoError("zip: deflate failed");
    out.resize(produced);
    return out;
}

std::uint32_t crc_of(std::string_view data) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

} // namespace

ZipReader::ZipReader(std::string_view bytes) : bytes_(bytes) {
    if (bytes.size() < 22) throw IoError("zip: file too small");
    // EOCD scan from the end (comment may follow it).
    std::size_t eocd = std::string_view::npos;
    std::size_t scan_limit = bytes.size() >= 22 + 65535 ? bytes.size() - 22 - 65535 : 0;
    for (std::size_t i = bytes.size() - 22 + 1; i-- > scan_limit;) {
        if (static_cast<unsigned char>(bytes[i]) == 0x50 && i + 4 <= bytes.size() &&
            std::memcmp(bytes.data() + i, "PK\x05\x06", 4) == 0) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string_view::npos) throw IoError("zip: end-of-central-directory not found");

    ByteReader r(bytes, eocd);
    if (r.u32() != kEocdSig) throw IoError("zip: bad EOCD signature");
    r.skip(2 + 2 + 2);                      // disk numbers, entries on disk
    std::uint16_t total_entries = r.u16();  // total entries
    std::uint32_t cd_size = r.u32();
    std::uint32_t cd_offset = r.u32();
    if (cd_offset == 0xffffffffu || total_entries == 0xffffu)
        throw IoError("zip: ZIP64 archives are not supported");
    (void)cd_size;

    ByteReader cd(bytes, cd_offset);
    records_.reserve(total_entries);
    for (std::uint16_t i = 0; i < total_entries; ++i) {
        if (cd.u32() != kCentralSig) throw IoError("zip: bad central directory record");
        cd.skip(2 + 2 + 2);              // version made by / needed / flags
        Record rec;
        rec.method = cd.u16();
        cd.skip(2 + 2);                  // dos time/date
        rec.crc32 = cd.u32();
        rec.compressed_size = cd.u32();
        rec.uncompressed_size = cd.u32();
        std::uint16_t name_len = cd.u16();
        std::uint16_t extra_len = cd.u16();
        std::uint16_t comment_len = cd.u16();
        cd.skip(2 + 2 + 4);              // disk start, internal/external attrs
        rec.local_offset = cd.u32();
        rec.name = std::string(cd.take(name_len));
        cd.skip(static_cast<std::size_t>(extra_len) + comment_len);
        names_.push_back(rec.name);
        records_.push_back(std::move(rec));
    }
}

bool ZipReader::contains(std::string_view name) const {
    for (const Record& rec : records_)
        if (rec.name == name) return true;
    return false;
}

std::string ZipReader::read(std::string_view name) const {
    for (const Record& rec : records_) {
        if (rec.name != name) continue;
        ByteReader r(bytes_, rec.local_offset);
        if (r.u32() != kLocalSig) throw IoError("zip: bad local header for " + rec.name);
        r.skip(2 + 2 + 2 + 2 + 2 + 4 + 4 + 4); // version..sizes (central dir values are authoritative)
        std::uint16_t name_len = r.u16();
        std::uint16_t extra_len = r.u16();
        r.skip(static_cast<std::size_t>(name_len) + extra_len);
        std::string_view payload = r.take(rec.compressed_size);

        std::string data;
        if (rec.method == kMethodStore) {
            data = std::string(payload);
        } else if (rec.method == kMethodDeflate) {
            data = inflate_raw(payload, rec.uncompressed_size);
        } else {
            throw IoError("zip: unsupported compression method for " + rec.name);
        }
        if (crc_of(data) != rec.crc32) throw IoError("zip: CRC mismatch for " + rec.name);
        return data;
    }
    throw IoError("zip: no such entry '" + std::string(name) + "'");
}

void ZipWriter::add(std::string name, std::string_view data) {
    Pending p;
    p.name = std::move(name);
    p.crc32 = crc_of(data);
    p.uncompressed_size = data.size();
    p.compressed = deflate_raw(data);
    p.method = kMethodDeflate;
    if (p.compressed.size() >= data.size()) {
        p.compressed = std::string(data);
        p.method = kMethodStore;
    }
    entries_.push_back(std::move(p));
}

std::string ZipWriter::finish() {
    std::string out;
    for (Pending& p : entries_) {
        if (p.uncompressed_size > std::numeric_limits<std::uint32_t>::max())
            throw IoError("zip: entry too large");
        p.local_offset = out.size();
        put32(out, kLocalSig);
        put16(out, 20);     // version needed
        put16(out, 1 << 11); // UTF-8 names
        put16(out, p.method);
        put16(out, 0); // dos time: fixed for determinism
        put16(out, 0x21); // dos date: 1980-01-01
        put32(out, p.crc32);
        put32(out, static_cast<std::uint32_t>(p.compressed.size()));
        put32(out, static_cast<std::uint32_t>(p.uncompressed_size));
        put16(out, static_cast<std::uint16_t>(p.name.size()));
        put16(out, 0); // extra
        out += p.name;
        out += p.compressed;
    }

    std::size_t cd_start = out.size();
    for (const Pending& p : entries_) {
        put32(out, kCentralSig);
        put16(out, 20); // version made by
        put16(out, 20); // version needed
        put16(out, 1 << 11);
        put16(out, p.method);
        put16(out, 0);
        put16(out, 0x21);
        put32(out, p.crc32);
        put32(out, static_cast<std::uint32_t>(p.compressed.size()));
        put32(out, static_cast<std::uint32_t>(p.uncompressed_size));
        put16(out, static_cast<std::uint16_t>(p.name.size()));
        put16(out, 0); // extra
        put16(out, 0); // comment
        put16(out, 0); // disk
        put16(out, 0); // internal attrs
        put32(out, 0); // external attrs
        put32(out, static_cast<std::uint32_t>(p.local_offset));
        out += p.name;
    }
    std::size_t cd_size = out.size() - cd_start;

    put32(out, kEocdSig);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(entries_.size()));
    put16(out, static_cast<std::uint16_t>(entries_.size()));
    put32(out, static_cast<std::uint32_t>(cd_size));
    put32(out, static_cast<std::uint32_t>(cd_start));
    put16(out, 0); // comment length

    entries_.clear();
    return out;
}

} // namespace sheetkit
