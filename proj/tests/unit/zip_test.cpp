#include <doctest.h>

#include <random>
#include <string>

#include <sheetkit/error.hpp>
#include <sheetkit/util.hpp>
#include <sheetkit/zip.hpp>

using namespace sheetkit;

namespace {

std::string all_bytes() {
    std::string s;
    for (int i = 0; i < 256; ++i) s.push_back(static_cast<char>(i));
    return s;
}

std::string noise(std::size_t n, std::uint32_t seed) {
    std::mt19937 r(seed);
    std::string s(n, '\0');
    for (char& c : s) c = static_cast<char>(r() & 0xff);
    return s;
}

} // namespace

TEST_CASE("zip archives round-trip") {
    ZipWriter w;
    std::string big(200'000, 'x'); // compresses hard
    w.add("empty.bin", "");
    w.add("bytes.bin", all_bytes());
    w.add("big.txt", big);
    w.add("dir/nested/ファイル.xml", "<a>text</a>");
    w.add("random.bin", noise(50'000, 5));
    std::string archive = w.finish();
    CHECK(archive.size() < 120'000); // deflate actually ran

    ZipReader r(archive);
    REQUIRE(r.names().size() == 5);
    CHECK(r.names()[0] == "empty.bin");
    CHECK(r.contains("big.txt"));
    CHECK_FALSE(r.contains("missing"));
    CHECK(r.read("empty.bin").empty());
    CHECK(r.read("bytes.bin") == all_bytes());
    CHECK(r.read("big.txt") == big);
    CHECK(r.read("dir/nested/ファイル.xml") == "<a>text</a>");
    CHECK(r.read("random.bin") == noise(50'000, 5));
    CHECK_THROWS_AS(r.read("missing"), IoError);
}

TEST_CASE("zip writing is deterministic") {
    auto build = [] {
        ZipWriter w;
        w.add("a.txt", "alpha");
        w.add("b.txt", noise(10'000, 9));
        return w.finish();
    };
    CHECK(build() == build());
}

TEST_CASE("corrupt archives are rejected") {
    ZipWriter w;
    w.add("a.txt", "some content worth checking");
    std::string archive = w.finish();

    CHECK_THROWS_AS(ZipReader("not a zip at all"), IoError);
    CHECK_THROWS_AS(ZipReader(""), IoError);
    CHECK_THROWS_AS(ZipReader(archive.substr(0, archive.size() / 2)), IoError);

    // Flip a payload byte: the central directory still parses but the CRC
    // check on read must fail.
    std::string bad = archive;
    bad[30 + 5] ^= 0x40; // inside the first local entry's data
    ZipReader r(bad);
    CHECK_THROWS_AS(r.read("a.txt"), IoError);
}

TEST_CASE("utility digests and tokens") {
    // FIPS 180-2 test vector.
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(token_hex(8).size() == 16);
    CHECK(token_hex(8) != token_hex(8));
    CHECK(now_millis() > 1'600'000'000'000LL);
}

TEST_CASE("atomic file writes land complete") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / ("sheetkit-test-" + token_hex(4));
    fs::create_directories(dir);
    fs::path target = dir / "out.bin";
    write_file_atomic(target, "first");
    CHECK(read_file(target) == "first");
    write_file_atomic(target, "second version");
    CHECK(read_file(target) == "second version");
    // No stray temp files left behind.
    int files = 0;
    for (auto& entry : fs::directory_iterator(dir)) {
        (void)entry;
        ++files;
    }
    CHECK(files == 1);
    fs::remove_all(dir);
}
