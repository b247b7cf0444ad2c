#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace sheetkit {

/// Spreadsheet error codes. #CIRC! is repo-defined for circular references;
/// the rest follow the usual spreadsheet set.
enum class ErrorCode {
    Ref,   // #REF!
    Value, // #VALUE!
    Div0,  // #DIV/0!
    NA,    // #N/A
    Name,  // #NAME?
    Num,   // #NUM!
    Spill, // #SPILL!
    Circ,  // #CIRC!
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view text);

/// Calendar date-time, proleptic Gregorian. No timezone.
struct DateTime {
    int year = 1900;
    int month = 1; // 1..12
    int day = 1;   // 1..31
    int hour = 0;
    int minute = 0;
    int second = 0;

    auto operator<=>(const DateTime&) const = default;
};

struct TimeOfDay {
    int hour = 0; // 0..23
    int minute = 0;
    int second = 0;

    auto operator<=>(const TimeOfDay&) const = default;
};

/// Tagged cell value: Empty | Number | Text | Boolean | DateTime | TimeOfDay | Error.
/// DateTime and TimeOfDay stay distinct variants; downstream normalization
/// treats them differently.
class CellValue {
public:
    using Storage =
        std::variant<std::monostate, double, std::string, bool, DateTime, TimeOfDay, ErrorCode>;

    CellValue() = default;

    static CellValue empty() { return CellValue(); }
    static CellValue number(double n) { return CellValue(Storage(n)); }
    static CellValue text(std::string s) { return CellValue(Storage(std::move(s))); }
    static CellValue boolean(bool b) { return CellValue(Storage(b)); }
    static CellValue datetime(DateTime dt) { return CellValue(Storage(dt)); }
    static CellValue time(TimeOfDay t) { return CellValue(Storage(t)); }
    static CellValue error(ErrorCode e) { return CellValue(Storage(e)); }

    bool is_empty() const { return std::holds_alternative<std::monostate>(v_); }
    bool is_number() const { return std::holds_alternative<double>(v_); }
    bool is_text() const { return std::holds_alternative<std::string>(v_); }
    bool is_boolean() const { return std::holds_alternative<bool>(v_); }
    bool is_datetime() const { return std::holds_alternative<DateTime>(v_); }
    bool is_time() const { return std::holds_alternative<TimeOfDay>(v_); }
    bool is_error() const { return std::holds_alternative<ErrorCode>(v_); }

    double as_number() const { return std::get<double>(v_); }
    const std::string& as_text() const { return std::get<std::string>(v_); }
    bool as_boolean() const { return std::get<bool>(v_); }
    const DateTime& as_datetime() const { return std::get<DateTime>(v_); }
    const TimeOfDay& as_time() const { return std::get<TimeOfDay>(v_); }
    ErrorCode as_error() const { return std::get<ErrorCode>(v_); }

    const Storage& storage() const { return v_; }

    bool operator==(const CellValue&) const = default;

private:
    explicit CellValue(Storage v) : v_(std::move(v)) {}

    Storage v_;
};

/// Display text for a value: what inspection tools show and what text
/// concatenation produces. Numbers use the shortest round-trip form.
std::string render(const CellValue& value);

/// Shortest text that parses back to exactly the same double. Serialization
/// and formula printing use this; it is not a display format.
std::string exact_number_text(double n);

/// Shortest round-trip decimal form of a double ("6", "2.5", "1e+20").
std::string format_number(double n);

// Excel 1900 date system, phantom 1900-02-29 (serial 60) included.
// The day serial carries only the date component.
std::int64_t excel_serial_days(const DateTime& dt);
double excel_serial(const DateTime& dt); // date serial plus day fraction
double day_fraction(const TimeOfDay& t);
DateTime datetime_from_serial(double serial);
TimeOfDay time_from_fraction(double fraction);

} // namespace sheetkit
