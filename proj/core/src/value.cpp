#include "sheetkit/value.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace sheetkit {

namespace {

constexpr std::array<std::string_view, 8> kErrorNames = {
    "#REF!", "#VALUE!", "#DIV/0!", "#N/A", "#NAME?", "#NUM!", "#SPILL!", "#CIRC!",
};

// Days from 1970-01-01 for a proleptic Gregorian civil date (Howard Hinnant's
// days_from_civil).
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

// Serial of 1900-03-01, the first date after the phantom leap day.
constexpr std::int64_t kPostBugSerial = 61;

} // namespace

std::string_view to_string(ErrorCode code) {
    return kErrorNames[static_cast<std::size_t>(code)];
}

std::optional<ErrorCode> parse_error_code(std::string_view text) {
    for (std::size_t i = 0; i < kErrorNames.size(); ++i) {
        if (text == kErrorNames[i]) return static_cast<ErrorCode>(i);
    }
    return std::nullopt;
}

std::string exact_number_text(double n) {
    if (std::isnan(n) || std::isinf(n)) return "#NUM!";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), n);
    (void)ec;
    return std::string(buf, end);
}

std::string format_number(double n) {
    if (std::isnan(n) || std::isinf(n)) return "#NUM!";
    char buf[64];
    if (n == std::floor(n) && std::fabs(n) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(n));
        return buf;
    }
    // Spreadsheet display precision: 15 significant digits.
    std::snprintf(buf, sizeof(buf), "%.15g", n);
    return buf;
}

std::string render(const CellValue& value) {
    if (value.is_empty()) return "";
    if (value.is_number()) return format_number(value.as_number());
    if (value.is_text()) return value.as_text();
    if (value.is_boolean()) return value.as_boolean() ? "TRUE" : "FALSE";
    if (value.is_datetime()) {
        const DateTime& dt = value.as_datetime();
        char buf[40];
        if (dt.hour == 0 && dt.minute == 0 && dt.second == 0) {
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", dt.year, dt.month, dt.day);
        } else {
            std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d", dt.year, dt.month,
                          dt.day, dt.hour, dt.minute, dt.second);
        }
        return buf;
    }
    if (value.is_time()) {
        const TimeOfDay& t = value.as_time();
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d", t.hour, t.minute, t.second);
        return buf;
    }
    return std::string(to_string(value.as_error()));
}

std::int64_t excel_serial_days(const DateTime& dt) {
    const std::int64_t delta =
        days_from_civil(dt.year, dt.month, dt.day) - days_from_civil(1899, 12, 30);
    // Before 1900-03-01 the 1900 system has no phantom day yet.
    return delta >= kPostBugSerial ? delta : delta - 1;
}

double excel_serial(const DateTime& dt) {
    const double frac = (dt.hour * 3600.0 + dt.minute * 60.0 + dt.second) / 86400.0;
    return static_cast<double>(excel_serial_days(dt)) + frac;
}

double day_fraction(const TimeOfDay& t) {
    return (t.hour * 3600.0 + t.minute * 60.0 + t.second) / 86400.0;
}

DateTime datetime_from_serial(double serial) {
    std::int64_t days = static_cast<std::int64_t>(std::floor(serial));
    double frac = serial - static_cast<double>(days);
    // Undo the phantom-day offset; serial 60 itself maps onto 1900-03-01's
    // civil date minus one, i.e. 1900-02-28 (no such civil 02-29 exists).
    std::int64_t delta = days >= kPostBugSerial ? days : days + 1;
    if (days == 60) delta = 60; // phantom day: pin to 1900-02-28
    int y, m, d;
    civil_from_days(delta + days_from_civil(1899, 12, 30), y, m, d);
    int total = static_cast<int>(std::llround(frac * 86400.0));
    if (total >= 86400) total = 86399;
    DateTime dt;
    dt.year = y;
    dt.month = m;
    dt.day = d;
    dt.hour = total / 3600;
    dt.minute = (total % 3600) / 60;
    dt.second = total % 60;
    return dt;
}

TimeOfDay time_from_fraction(double fraction) {
    fraction -= std::floor(fraction);
    int total = static_cast<int>(std::llround(fraction * 86400.0));
    if (total >= 86400) total = 0;
    TimeOfDay t;
    t.hour = total / 3600;
    t.minute = (total % 3600) / 60;
    t.second = total % 60;
    return t;
}

} // namespace sheetkit
