#pragma once

#include <optional>
#include <string>

#include "sheetkit/value.hpp"

namespace sheetkit::verify {

enum class NormKind { number, text, serial_date, time, empty, boolean, error };

/// Cell value reduced to the comparison domain. Only the field matching
/// `kind` is meaningful; the rest stay value-initialized so the defaulted
/// equality is exact.
struct NormalizedValue {
    NormKind kind = NormKind::empty;
    double number = 0.0;     ///< number: already rounded to 2 decimals
    std::string text;        ///< text, and time as "HH:MM"
    long long serial = 0;    ///< serial_date: whole Excel 1900-system days
    bool boolean = false;
    ErrorCode error = ErrorCode::Value;

    bool operator==(const NormalizedValue&) const = default;
};

/// Half-away-from-zero rounding to 2 decimal places (binary doubles, so
/// inexactly-stored boundaries round by their stored value).
double round2(double x);

/// Full-string numeric parse: optional surrounding ASCII whitespace, optional
/// sign, decimal point, scientific notation. Locale separators, hex, inf and
/// nan are rejected.
std::optional<double> parse_number_text(std::string_view text);

/// Comparison normalization:
///   Number            -> number rounded to 2 dp
///   Text parseable as a number -> the same number rule
///   other Text        -> text (empty string -> empty)
///   DateTime          -> serial_date of the date component
///   TimeOfDay         -> time "HH:MM" (seconds dropped)
///   Empty             -> empty
///   Boolean           -> boolean
///   Error             -> error (codes match only themselves)
NormalizedValue normalize_cell(const CellValue& v);

/// False when the kinds differ; exact equality within a kind. A positive
/// tolerance relaxes the number case to |a-b| <= tolerance.
bool cells_match(const NormalizedValue& a, const NormalizedValue& b,
                 double numeric_tolerance = 0.0);

/// Diagnostic rendering, e.g. "number(15100)", "text(\"hi\")", "empty".
std::string to_string(const NormalizedValue& v);

} // namespace sheetkit::verify
