#pragma once

#include <functional>
#include <string_view>
#include <variant>

#include "sheetkit/formula/engine.hpp"

namespace sheetkit::formula {

/// One function invocation, handed to the library by the evaluator. Argument
/// expressions come unevaluated so IF/IFERROR can stay lazy; `eval` evaluates
/// one of them on demand.
struct FunctionCall {
    std::string_view name; // uppercase
    const std::vector<ExprPtr>* args = nullptr;
    EvalContext* ctx = nullptr;
    std::function<EvalResult(const Expr&)> eval;
};

bool function_known(std::string_view name);

/// Runs a library function; unknown names yield #NAME?.
EvalResult dispatch_function(const FunctionCall& call);

// --- scalar coercions shared by operators and functions ---

/// Number coercion: Empty→0, Boolean→0/1, DateTime/TimeOfDay→serial, Text
/// parsed fully or #VALUE!.
std::variant<double, ErrorCode> to_number(const CellValue& v);

/// Text coercion: Empty→"", numbers in display form (15 significant digits),
/// DateTime/TimeOfDay→serial text (date rendering is TEXT()'s job).
std::variant<std::string, ErrorCode> to_text_value(const CellValue& v);

/// Boolean coercion: numbers ≠0, Text "TRUE"/"FALSE" or numeric text, Empty→false.
std::variant<bool, ErrorCode> to_boolean(const CellValue& v);

/// Spreadsheet ordering: numbers (and date serials) < text < booleans, text
/// case-insensitive, Empty adapting to the other side. Returns -1/0/+1.
/// Neither operand may be an error.
int compare_values(const CellValue& a, const CellValue& b);

/// The start of DateTime `serial + days`-style math, and DATE()'s rollover:
/// months and days outside their calendar ranges carry over.
CellValue make_date(double year, double month, double day);

} // namespace sheetkit::formula
