#include <doctest.h>

#include <sheetkit/error.hpp>
#include <sheetkit/workbook.hpp>

using namespace sheetkit;

TEST_CASE("sheet lookup is case-insensitive, insertion order kept") {
    Workbook wb;
    wb.add_sheet("Data");
    wb.add_sheet("Summary");
    CHECK(wb.sheets()[0].name() == "Data");
    CHECK(wb.sheet("data") != nullptr);
    CHECK(wb.sheet("SUMMARY") == &wb.sheets()[1]);
    CHECK(wb.sheet("missing") == nullptr);
    CHECK_THROWS_AS(wb.add_sheet("DATA"), Error);
}

TEST_CASE("cell access and content") {
    Worksheet ws("S");
    CHECK(ws.value_at(CellPos{1, 1}).is_empty());
    CHECK(ws.find(CellPos{1, 1}) == nullptr);

    ws.set_value(CellPos{2, 3}, CellValue::number(7));
    CHECK(ws.value_at(CellPos{2, 3}).as_number() == 7);

    ws.set_formula(CellPos{4, 1}, "A1+1");
    const Cell* f = ws.find(CellPos{4, 1});
    REQUIRE(f != nullptr);
    CHECK(f->formula == "A1+1");
    CHECK(f->has_content());

    Cell blank;
    CHECK_FALSE(blank.has_content());
    blank.formula = "1";
    CHECK(blank.has_content());
}

TEST_CASE("sheet extents cover cells and merges") {
    Worksheet ws("S");
    CHECK(ws.max_row() == 0);
    CHECK(ws.max_col() == 0);

    ws.set_value(CellPos{5, 2}, CellValue::number(1));
    CHECK(ws.max_row() == 5);
    CHECK(ws.max_col() == 2);

    RangeRef merge = RangeRef::single("", 7, 1);
    merge.bottom_right.row = 9;
    merge.bottom_right.col = 4;
    ws.merged().push_back(merge);
    CHECK(ws.max_row() == 9);
    CHECK(ws.max_col() == 4);
}

TEST_CASE("sheet name equality rule") {
    CHECK(sheet_name_equal("Sheet1", "sheet1"));
    CHECK(sheet_name_equal("", ""));
    CHECK_FALSE(sheet_name_equal("Sheet1", "Sheet2"));
    CHECK_FALSE(sheet_name_equal("résumé", "RÉSUMÉ")); // case folding is ASCII-only
}

TEST_CASE("workbook equality is structural") {
    Workbook a;
    a.add_sheet("S").set_value(CellPos{1, 1}, CellValue::text("x"));
    Workbook b;
    b.add_sheet("S").set_value(CellPos{1, 1}, CellValue::text("x"));
    CHECK(a == b);
    b.sheets()[0].at(CellPos{1, 1}).format = CellFormat{.bold = true};
    CHECK_FALSE(a == b);
}
