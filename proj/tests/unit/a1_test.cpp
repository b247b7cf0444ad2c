#include <doctest.h>

#include <random>

#include <sheetkit/a1.hpp>
#include <sheetkit/error.hpp>

using namespace sheetkit;

namespace {

CellRef ref(std::string_view text) { return std::get<CellRef>(parse_a1(text)); }
RangeRef rng(std::string_view text) { return std::get<RangeRef>(parse_a1(text)); }

} // namespace

TEST_CASE("column letters round-trip") {
    CHECK(column_letters(1) == "A");
    CHECK(column_letters(26) == "Z");
    CHECK(column_letters(27) == "AA");
    CHECK(column_letters(52) == "AZ");
    CHECK(column_letters(702) == "ZZ");
    CHECK(column_letters(703) == "AAA");
    CHECK(column_letters(kMaxCol) == "XFD");
    CHECK(column_from_letters("xfd") == kMaxCol);

    std::mt19937 r(7);
    for (int i = 0; i < 2000; ++i) {
        int col = std::uniform_int_distribution<int>(1, kMaxCol)(r);
        CHECK(column_from_letters(column_letters(col)) == col);
    }
}

TEST_CASE("cell references parse") {
    CellRef d1 = ref("D1");
    CHECK(d1.col == 4);
    CHECK(d1.row == 1);
    CHECK_FALSE(d1.col_absolute);
    CHECK_FALSE(d1.sheet.has_value());

    CellRef abs = ref("$B$3");
    CHECK(abs.col == 2);
    CHECK(abs.row == 3);
    CHECK(abs.col_absolute);
    CHECK(abs.row_absolute);

    CellRef mixed = ref("C$7");
    CHECK_FALSE(mixed.col_absolute);
    CHECK(mixed.row_absolute);

    CellRef sheeted = ref("Sheet2!D1");
    CHECK(sheeted.sheet == "Sheet2");

    CellRef quoted = ref("'My Sheet'!A1");
    CHECK(quoted.sheet == "My Sheet");

    CellRef esc = ref("'Bob''s'!A1");
    CHECK(esc.sheet == "Bob's");
}

TEST_CASE("range references parse") {
    RangeRef r = rng("$B$3:C5");
    CHECK(r.top_left.row == 3);
    CHECK(r.top_left.col == 2);
    CHECK(r.bottom_right.row == 5);
    CHECK(r.bottom_right.col == 3);
    CHECK(r.top_left.col_absolute);
    CHECK_FALSE(r.whole_col);

    RangeRef back = rng("C5:B3"); // parse normalizes the corners
    CHECK(back.top_left.row == 3);
    CHECK(back.top_left.col == 2);
    CHECK(back.bottom_right.row == 5);
    CHECK(back.bottom_right.col == 3);

    RangeRef cols = rng("A:B");
    CHECK(cols.whole_col);
    CHECK(cols.top_left.row == 1);
    CHECK(cols.bottom_right.row == kMaxRow);
    CHECK(cols.top_left.col == 1);
    CHECK(cols.bottom_right.col == 2);

    RangeRef rows = rng("2:4");
    CHECK(rows.whole_row);
    CHECK(rows.top_left.col == 1);
    CHECK(rows.bottom_right.col == kMaxCol);

    RangeRef sheeted = rng("'My Sheet'!A1:B2");
    CHECK(sheeted.sheet == "My Sheet");
    CHECK_FALSE(sheeted.top_left.sheet.has_value());
}

TEST_CASE("malformed a1 text throws") {
    for (const char* bad : {"", "1A", "A0", "A", "$", "XFE1", "A1048577", "A1:", ":B2",
                            "Sheet1!", "'open!A1", "A1B", "A 1", "A1:B2:C3"}) {
        CHECK_THROWS_AS(parse_a1(bad), ParseError);
    }
}

TEST_CASE("a1 text round-trips") {
    std::mt19937 r(11);
    auto flip = [&] { return std::uniform_int_distribution<int>(0, 1)(r) == 1; };
    for (int i = 0; i < 1000; ++i) {
        CellRef c;
        c.row = std::uniform_int_distribution<int>(1, kMaxRow)(r);
        c.col = std::uniform_int_distribution<int>(1, kMaxCol)(r);
        c.row_absolute = flip();
        c.col_absolute = flip();
        if (flip()) c.sheet = flip() ? "Plain" : "Needs Quoting";
        CHECK(ref(to_a1(c)) == c);
    }
    for (int i = 0; i < 1000; ++i) {
        RangeRef g;
        g.top_left.row = std::uniform_int_distribution<int>(1, 100)(r);
        g.top_left.col = std::uniform_int_distribution<int>(1, 50)(r);
        g.bottom_right.row = g.top_left.row + std::uniform_int_distribution<int>(0, 30)(r);
        g.bottom_right.col = g.top_left.col + std::uniform_int_distribution<int>(1, 10)(r);
        if (flip()) g.sheet = "Data 2";
        CHECK(rng(to_a1(g)) == g);
    }
}

TEST_CASE("degenerate range text prints as a cell") {
    RangeRef g = RangeRef::single("", 3, 2);
    CHECK(to_a1(g) == "B3");
    CHECK(to_a1(rng("A:A")) == "A:A");
    CHECK(to_a1(rng("3:3")) == "3:3");
    CHECK(parse_range("B3").top_left.row == 3);
    CHECK(parse_range("B3").bottom_right.row == 3);
}

TEST_CASE("sheet prefix quoting") {
    CHECK(sheet_prefix("Sheet1") == "Sheet1!");
    CHECK(sheet_prefix("My Sheet") == "'My Sheet'!");
    CHECK(sheet_prefix("Bob's") == "'Bob''s'!");
    CHECK(sheet_prefix("42") == "'42'!"); // would otherwise read as a row
}
