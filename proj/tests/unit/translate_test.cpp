#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include <sheetkit/formula/parser.hpp>
#include <sheetkit/formula/printer.hpp>
#include <sheetkit/formula/translate.hpp>

using namespace sheetkit;
using namespace sheetkit::formula;

namespace {

std::string adjusted(std::string_view body, std::string_view sheet, Axis axis,
                     std::vector<int> deleted, std::string_view home = "Sheet1") {
    return print_formula(*adjust_for_structural_delete(*parse_formula(body), sheet, axis, deleted, home));
}

} // namespace

TEST_CASE("fill translation shifts relative parts only") {
    CHECK(translate_formula("A1+B2", 1, 0) == "A2+B3");
    CHECK(translate_formula("A1+B2", 0, 2) == "C1+D2");
    CHECK(translate_formula("$A$1+B2", 5, 5) == "$A$1+G7");
    CHECK(translate_formula("$A1+A$1", 1, 1) == "$A2+B$1");
    CHECK(translate_formula("SUM(A1:B2)", 2, 1) == "SUM(B3:C4)");
    CHECK(translate_formula("Sheet2!A1", 1, 1) == "Sheet2!B2");
    CHECK(translate_formula("1+\"x\"", 7, 7) == "1+\"x\"");
}

TEST_CASE("fill translation off the grid is a #REF! literal") {
    CHECK(translate_formula("A1", -1, 0) == "#REF!");
    CHECK(translate_formula("A1", 0, -1) == "#REF!");
    CHECK(translate_formula("A1+B2", -1, 0) == "#REF!+B1");
    CHECK(translate_formula("A1:B2", 0, -1) == "#REF!");
    CHECK(translate_formula("XFD1", 0, 1) == "#REF!");
    CHECK(translate_formula("A1048576", 1, 0) == "#REF!");
    CHECK(translate_formula("$A$1", -5, -5) == "$A$1"); // absolute never moves
}

TEST_CASE("whole rows and columns ignore the open axis") {
    CHECK(translate_formula("SUM(A:B)", 10, 1) == "SUM(B:C)");
    CHECK(translate_formula("SUM(2:4)", 1, 10) == "SUM(3:5)");
    CHECK(translate_formula("SUM(A:B)", 0, -1) == "SUM(#REF!)");
}

TEST_CASE("structural delete rewrites references") {
    // Delete row 2: A1 stays, A2 dies, A3 slides up.
    CHECK(adjusted("A1+A2+A3", "Sheet1", Axis::rows, {2}) == "A1+#REF!+A2");
    // Delete column B.
    CHECK(adjusted("B1&C1", "Sheet1", Axis::cols, {2}) == "#REF!&B1");
    // Ranges clamp their endpoints.
    CHECK(adjusted("SUM(A2:A5)", "Sheet1", Axis::rows, {3}) == "SUM(A2:A4)");
    CHECK(adjusted("SUM(A2:A5)", "Sheet1", Axis::rows, {2, 3, 4, 5}) == "SUM(#REF!)");
    CHECK(adjusted("SUM(A2:A5)", "Sheet1", Axis::rows, {1}) == "SUM(A1:A4)");
    CHECK(adjusted("SUM(A2:A5)", "Sheet1", Axis::rows, {5, 6, 7}) == "SUM(A2:A4)");
    // Absolute references shift too: deletion moves the grid itself.
    CHECK(adjusted("$A$3", "Sheet1", Axis::rows, {1}) == "$A$2");
    // Other sheets are untouched; explicit references to the edited sheet match.
    CHECK(adjusted("Other!A3+A3", "Sheet1", Axis::rows, {1}) == "Other!A3+A2");
    // Matching is case-blind but the author's spelling is preserved.
    CHECK(adjusted("sheet1!A3", "Sheet1", Axis::rows, {1}) == "sheet1!A2");
    // Formula living on another sheet: bare references mean that sheet.
    CHECK(adjusted("A3+Sheet1!A3", "Sheet1", Axis::rows, {1}, "Elsewhere") == "A3+Sheet1!A2");
    // The open axis of whole-column ranges is immune to row deletion.
    CHECK(adjusted("SUM(B:B)", "Sheet1", Axis::rows, {1, 2, 3}) == "SUM(B:B)");
    CHECK(adjusted("SUM(B:B)", "Sheet1", Axis::cols, {2}) == "SUM(#REF!)");
    CHECK(adjusted("SUM(B:C)", "Sheet1", Axis::cols, {2}) == "SUM(B:B)");
    // A range collapsing to one cell becomes a plain reference.
    CHECK(adjusted("SUM(A1:A2)", "Sheet1", Axis::rows, {2}) == "SUM(A1)");
}

TEST_CASE("structural delete matches the rebuilt-grid oracle") {
    std::mt19937 r(101);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(r); };

    for (int iter = 0; iter < 1000; ++iter) {
        // Random deleted set over rows 1..30.
        std::vector<int> deleted;
        for (int row = 1; row <= 30; ++row)
            if (pick(0, 4) == 0) deleted.push_back(row);

        // Oracle: where each old row lands once survivors close ranks.
        auto new_row = [&](int row) -> int { // 0 = deleted
            if (std::find(deleted.begin(), deleted.end(), row) != deleted.end()) return 0;
            int shift = 0;
            for (int d : deleted)
                if (d < row) ++shift;
            return row - shift;
        };

        int row = pick(1, 30);
        std::string ref = "A" + std::to_string(row);
        std::string got = adjusted(ref, "Sheet1", Axis::rows, deleted);
        std::string want = new_row(row) == 0 ? "#REF!" : "A" + std::to_string(new_row(row));
        CAPTURE(ref);
        CHECK(got == want);

        // Range case: survivors inside [lo, hi] decide the rewritten extent.
        int lo = pick(1, 28);
        int hi = pick(lo, 30);
        std::string range = "B" + std::to_string(lo) + ":B" + std::to_string(hi);
        int first = 0, last = 0;
        for (int row2 = lo; row2 <= hi; ++row2) {
            if (new_row(row2) == 0) continue;
            if (first == 0) first = new_row(row2);
            last = new_row(row2);
        }
        std::string want_range;
        if (first == 0)
            want_range = "#REF!";
        else if (first == last)
            want_range = "B" + std::to_string(first);
        else
            want_range = "B" + std::to_string(first) + ":B" + std::to_string(last);
        std::string got_range = adjusted(range, "Sheet1", Axis::rows, deleted);
        CAPTURE(range);
        CHECK(got_range == want_range);
    }
}

TEST_CASE("translation round-trips when it stays on the grid") {
    const char* formulas[] = {"A5+B6*2", "SUM(C3:D9)", "IF(E5>0,F5,-G5)", "$H$8+I9"};
    std::mt19937 r(77);
    for (const char* f : formulas) {
        for (int i = 0; i < 50; ++i) {
            int dr = std::uniform_int_distribution<int>(-2, 40)(r);
            int dc = std::uniform_int_distribution<int>(0, 40)(r);
            std::string there = translate_formula(f, dr, dc);
            CHECK(translate_formula(there, -dr, -dc) == print_formula(*parse_formula(f)));
        }
    }
}
