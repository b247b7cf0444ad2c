#include "sheetkit/verify/normalize.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace sheetkit::verify {

namespace {

NormalizedValue make_number(double rounded) {
    NormalizedValue v;
    v.kind = NormKind::number;
    v.number = rounded;
    return v;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

} // namespace

double round2(double x) {
    // std::round is half-away-from-zero, which is the rule here.
    return std::round(x * 100.0) / 100.0;
}

std::optional<double> parse_number_text(std::string_view text) {
    std::size_t b = 0, e = text.size();
    while (b < e && (text[b] == ' ' || text[b] == '\t' || text[b] == '\r' || text[b] == '\n')) ++b;
    while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t' || text[e - 1] == '\r' ||
                     text[e - 1] == '\n'))
        --e;
    std::string_view s = text.substr(b, e - b);
    if (s.empty()) return std::nullopt;

    // Validate the shape ourselves: sign? (d+ (.d*)? | .d+) ([eE] sign? d+)?
    // from_chars would also accept "inf"/"nan", which must stay text.
    std::size_t i = 0;
    if (s[i] == '+' || s[i] == '-') ++i;
    std::size_t digits = 0;
    while (i < s.size() && is_digit(s[i])) ++i, ++digits;
    if (i < s.size() && s[i] == '.') {
        ++i;
        while (i < s.size() && is_digit(s[i])) ++i, ++digits;
    }
    if (digits == 0) return std::nullopt;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        std::size_t exp_digits = 0;
        while (i < s.size() && is_digit(s[i])) ++i, ++exp_digits;
        if (exp_digits == 0) return std::nullopt;
    }
    if (i != s.size()) return std::nullopt;

    // from_chars rejects a leading '+'; the shape check already allowed it.
    std::string_view body = s;
    if (body[0] == '+') body.remove_prefix(1);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), out);
    if (ec != std::errc{} || ptr != body.data() + body.size()) return std::nullopt;
    if (!std::isfinite(out)) return std::nullopt;
    return out;
}

NormalizedValue normalize_cell(const CellValue& v) {
    NormalizedValue out;
    if (v.is_empty()) return out;
    if (v.is_number()) return make_number(round2(v.as_number()));
    if (v.is_text()) {
        const std::string& t = v.as_text();
        if (t.empty()) return out; // empty string == empty cell
        if (auto n = parse_number_text(t)) return make_number(round2(*n));
        out.kind = NormKind::text;
        out.text = t;
        return out;
    }
    if (v.is_datetime()) {
        out.kind = NormKind::serial_date;
        out.serial = excel_serial_days(v.as_datetime());
        return out;
    }
    if (v.is_time()) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%02d:%02d", v.as_time().hour, v.as_time().minute);
        out.kind = NormKind::time;
        out.text = buf;
        return out;
    }
    if (v.is_boolean()) {
        out.kind = NormKind::boolean;
        out.boolean = v.as_boolean();
        return out;
    }
    out.kind = NormKind::error;
    out.error = v.as_error();
    return out;
}

bool cells_match(const NormalizedValue& a, const NormalizedValue& b, double numeric_tolerance) {
    if (a.kind != b.kind) return false;
    if (a.kind == NormKind::number && numeric_tolerance > 0.0)
        return std::fabs(a.number - b.number) <= numeric_tolerance;
    return a == b;
}

std::string to_string(const NormalizedValue& v) {
    switch (v.kind) {
    case NormKind::number: return "number(" + format_number(v.number) + ")";
    case NormKind::text: return "text(\"" + v.text + "\")";
    case NormKind::serial_date: return "date(" + std::to_string(v.serial) + ")";
    case NormKind::time: return "time(" + v.text + ")";
    case NormKind::empty: return "empty";
    case NormKind::boolean: return v.boolean ? "bool(TRUE)" : "bool(FALSE)";
    case NormKind::error: return "error(" + std::string(sheetkit::to_string(v.error)) + ")";
    }
    return "?";
}

} // namespace sheetkit::verify
