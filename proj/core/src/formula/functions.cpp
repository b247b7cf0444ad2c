#include "sheetkit/formula/functions.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <unordered_map>

namespace sheetkit::formula {

namespace {

CellValue err(ErrorCode code) { return CellValue::error(code); }

bool numeric_kind(const CellValue& v) {
    return v.is_number() || v.is_datetime() || v.is_time();
}

double numeric_value(const CellValue& v) {
    if (v.is_number()) return v.as_number();
    if (v.is_datetime()) return excel_serial(v.as_datetime());
    return day_fraction(v.as_time());
}

std::optional<double> parse_full_number(std::string_view s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    if (begin == end) return std::nullopt;
    std::string body(s.substr(begin, end - begin));
    char* tail = nullptr;
    double value = std::strtod(body.c_str(), &tail);
    if (tail != body.c_str() + body.size()) return std::nullopt;
    return value;
}

char ascii_lower(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

int ci_compare(std::string_view a, std::string_view b) {
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        char x = ascii_lower(a[i]), y = ascii_lower(b[i]);
        if (x != y) return x < y ? -1 : 1;
    }
    if (a.size() == b.size()) return 0;
    return a.size() < b.size() ? -1 : 1;
}

bool ci_equal(std::string_view a, std::string_view b) { return ci_compare(a, b) == 0; }

// Spreadsheet wildcards: '*' any run, '?' one char, '~' escapes the next.
bool wildcard_match(std::string_view pattern, std::string_view text) {
    if (pattern.empty()) return text.empty();
    char p = pattern[0];
    if (p == '*') {
        for (std::size_t skip = 0; skip <= text.size(); ++skip) {
            if (wildcard_match(pattern.substr(1), text.substr(skip))) return true;
        }
        return false;
    }
    if (p == '~' && pattern.size() >= 2) {
        return !text.empty() && text[0] == pattern[1] &&
               wildcard_match(pattern.substr(2), text.substr(1));
    }
    if (text.empty()) return false;
    if (p == '?' || ascii_lower(p) == ascii_lower(text[0]))
        return wildcard_match(pattern.substr(1), text.substr(1));
    return false;
}

bool has_wildcard(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '~') {
            ++i;
            continue;
        }
        if (s[i] == '*' || s[i] == '?') return true;
    }
    return false;
}

bool text_matches(std::string_view pattern, std::string_view text) {
    return has_wildcard(pattern) ? wildcard_match(pattern, text) : ci_equal(pattern, text);
}

double round_half_away(double x, int digits) {
    double scale = std::pow(10.0, digits);
    double scaled = x * scale;
    double rounded = std::floor(std::fabs(scaled) + 0.5);
    return std::copysign(rounded, x) / scale;
}

// UTF-8 codepoint boundaries (byte offsets, including one-past-end).
std::vector<std::size_t> cp_offsets(std::string_view s) {
    std::vector<std::size_t> offsets;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xc0) != 0x80) offsets.push_back(i);
    }
    offsets.push_back(s.size());
    return offsets;
}

Matrix to_matrix(EvalResult r) {
    if (Matrix* m = std::get_if<Matrix>(&r)) return std::move(*m);
    Matrix m = Matrix::sized(1, 1);
    m.at(0, 0) = std::move(std::get<CellValue>(r));
    return m;
}

// ---------------------------------------------------------------------------
// Call-shape helpers.

struct Fn {
    const FunctionCall& call;

    std::size_t argc() const { return call.args->size(); }
    const Expr& arg(std::size_t i) const { return *(*call.args)[i]; }
    EvalResult eval(std::size_t i) const { return call.eval(arg(i)); }
    CellValue scalar(std::size_t i) const { return scalarize(eval(i)); }
    Matrix matrix(std::size_t i) const { return to_matrix(eval(i)); }

    // Scalar arg coerced to number; nullopt means "propagate `failure`".
    std::optional<double> number(std::size_t i, CellValue& failure) const {
        CellValue v = scalar(i);
        auto n = to_number(v);
        if (ErrorCode* e = std::get_if<ErrorCode>(&n)) {
            failure = err(*e);
            return std::nullopt;
        }
        return std::get<double>(n);
    }

    std::optional<std::string> text(std::size_t i, CellValue& failure) const {
        CellValue v = scalar(i);
        auto t = to_text_value(v);
        if (ErrorCode* e = std::get_if<ErrorCode>(&t)) {
            failure = err(*e);
            return std::nullopt;
        }
        return std::get<std::string>(std::move(t));
    }

    std::optional<bool> boolean(std::size_t i, CellValue& failure) const {
        CellValue v = scalar(i);
        auto b = to_boolean(v);
        if (ErrorCode* e = std::get_if<ErrorCode>(&b)) {
            failure = err(*e);
            return std::nullopt;
        }
        return std::get<bool>(b);
    }
};

// Folds the numeric contents of every argument. Range-shaped arguments use
// cell rules (text/booleans/empties skipped), literal scalars coerce. Errors
// propagate unless `ignore_errors`.
template <typename F>
std::optional<CellValue> fold_numeric(const Fn& fn, bool ignore_errors, F&& each) {
    for (std::size_t i = 0; i < fn.argc(); ++i) {
        EvalResult r = fn.eval(i);
        if (Matrix* m = std::get_if<Matrix>(&r)) {
            for (const CellValue& v : m->cells) {
                if (v.is_error()) {
                    if (ignore_errors) continue;
                    return v;
                }
                if (numeric_kind(v)) each(numeric_value(v));
            }
        } else {
            const CellValue& v = std::get<CellValue>(r);
            if (v.is_error()) {
                if (ignore_errors) continue;
                return v;
            }
            if (v.is_empty()) continue; // literal blank argument
            auto n = to_number(v);
            if (ErrorCode* e = std::get_if<ErrorCode>(&n)) {
                if (ignore_errors) continue;
                return err(*e);
            }
            each(std::get<double>(n));
        }
    }
    return std::nullopt;
}

CellValue finite_number(double x) {
    return std::isfinite(x) ? CellValue::number(x) : err(ErrorCode::Num);
}

// ---------------------------------------------------------------------------
// Criteria (SUMIF / COUNTIF).

struct Criteria {
    enum Op { eq, ne, lt, le, gt, ge } op = eq;
    CellValue operand;
};

Criteria parse_criteria(const CellValue& raw) {
    Criteria c;
    if (!raw.is_text()) {
        c.operand = raw;
        return c;
    }
    std::string_view s = raw.as_text();
    if (s.rfind(">=", 0) == 0) {
        c.op = Criteria::ge;
        s.remove_prefix(2);
    } else if (s.rfind("<=", 0) == 0) {
        c.op = Criteria::le;
        s.remove_prefix(2);
    } else if (s.rfind("<>", 0) == 0) {
        c.op = Criteria::ne;
        s.remove_prefix(2);
    } else if (s.rfind(">", 0) == 0) {
        c.op = Criteria::gt;
        s.remove_prefix(1);
    } else if (s.rfind("<", 0) == 0) {
        c.op = Criteria::lt;
        s.remove_prefix(1);
    } else if (s.rfind("=", 0) == 0) {
        s.remove_prefix(1);
    }
    if (auto n = parse_full_number(s))
        c.operand = CellValue::number(*n);
    else if (ci_equal(s, "TRUE"))
        c.operand = CellValue::boolean(true);
    else if (ci_equal(s, "FALSE"))
        c.operand = CellValue::boolean(false);
    else
        c.operand = CellValue::text(std::string(s));
    return c;
}

bool criteria_equal(const CellValue& cell, const CellValue& operand) {
    if (operand.is_text()) {
        if (operand.as_text().empty()) return cell.is_empty() || (cell.is_text() && cell.as_text().empty());
        return cell.is_text() && text_matches(operand.as_text(), cell.as_text());
    }
    if (operand.is_number()) {
        if (numeric_kind(cell)) return numeric_value(cell) == operand.as_number();
        if (cell.is_text()) {
            auto n = parse_full_number(cell.as_text());
            return n && *n == operand.as_number();
        }
        return false;
    }
    if (operand.is_boolean()) return cell.is_boolean() && cell.as_boolean() == operand.as_boolean();
    if (operand.is_error()) return cell.is_error() && cell.as_error() == operand.as_error();
    if (operand.is_empty()) return cell.is_empty();
    if (numeric_kind(operand)) return numeric_kind(cell) && numeric_value(cell) == numeric_value(operand);
    return false;
}

bool criteria_match(const CellValue& cell, const Criteria& c) {
    switch (c.op) {
        case Criteria::eq: return criteria_equal(cell, c.operand);
        case Criteria::ne: return !criteria_equal(cell, c.operand);
        default: break;
    }
    int cmp;
    if (c.operand.is_number() || numeric_kind(c.operand)) {
        if (!numeric_kind(cell)) return false;
        double a = numeric_value(cell), b = numeric_value(c.operand);
        cmp = a < b ? -1 : a > b ? 1 : 0;
    } else if (c.operand.is_text()) {
        if (!cell.is_text()) return false;
        cmp = ci_compare(cell.as_text(), c.operand.as_text());
    } else if (c.operand.is_boolean()) {
        if (!cell.is_boolean()) return false;
        cmp = static_cast<int>(cell.as_boolean()) - static_cast<int>(c.operand.as_boolean());
    } else {
        return false;
    }
    switch (c.op) {
        case Criteria::lt: return cmp < 0;
        case Criteria::le: return cmp <= 0;
        case Criteria::gt: return cmp > 0;
        case Criteria::ge: return cmp >= 0;
        default: return false;
    }
}

// ---------------------------------------------------------------------------
// Lookup helpers.

bool lookup_equal(const CellValue& key, const CellValue& cell) {
    if (key.is_text() && cell.is_text()) return text_matches(key.as_text(), cell.as_text());
    if (numeric_kind(key) && numeric_kind(cell)) return numeric_value(key) == numeric_value(cell);
    if (key.is_boolean() && cell.is_boolean()) return key.as_boolean() == cell.as_boolean();
    return false;
}

bool same_kind(const CellValue& a, const CellValue& b) {
    if (numeric_kind(a) && numeric_kind(b)) return true;
    if (a.is_text() && b.is_text()) return true;
    if (a.is_boolean() && b.is_boolean()) return true;
    return false;
}

CellValue present_or_zero(const CellValue& v) {
    return v.is_empty() ? CellValue::number(0) : v;
}

// ---------------------------------------------------------------------------
// The library.

EvalResult fn_sum(const Fn& fn) {
    double sum = 0;
    if (auto e = fold_numeric(fn, false, [&](double x) { sum += x; })) return *e;
    return finite_number(sum);
}

EvalResult fn_average(const Fn& fn) {
    double sum = 0;
    int count = 0;
    if (auto e = fold_numeric(fn, false, [&](double x) { sum += x; ++count; })) return *e;
    if (count == 0) return err(ErrorCode::Div0);
    return finite_number(sum / count);
}

EvalResult fn_count(const Fn& fn) {
    int count = 0;
    for (std::size_t i = 0; i < fn.argc(); ++i) {
        EvalResult r = fn.eval(i);
        if (Matrix* m = std::get_if<Matrix>(&r)) {
            for (const CellValue& v : m->cells)
                if (numeric_kind(v)) ++count;
        } else {
            const CellValue& v = std::get<CellValue>(r);
            if (numeric_kind(v) || v.is_boolean()) ++count;
            else if (v.is_text() && parse_full_number(v.as_text())) ++count;
        }
    }
    return CellValue::number(count);
}

EvalResult fn_counta(const Fn& fn) {
    int count = 0;
    for (std::size_t i = 0; i < fn.argc(); ++i) {
        EvalResult r = fn.eval(i);
        if (Matrix* m = std::get_if<Matrix>(&r)) {
            for (const CellValue& v : m->cells)
                if (!v.is_empty()) ++count;
        } else if (!std::get<CellValue>(r).is_empty()) {
            ++count;
        }
    }
    return CellValue::number(count);
}

EvalResult fn_minmax(const Fn& fn, bool want_max) {
    bool any = false;
    double best = 0;
    auto consider = [&](double x) {
        if (!any || (want_max ? x > best : x < best)) best = x;
        any = true;
    };
    if (auto e = fold_numeric(fn, false, consider)) return *e;
    return CellValue::number(any ? best : 0);
}

EvalResult fn_round(const Fn& fn) {
    if (fn.argc() < 1 || fn.argc() > 2) return err(ErrorCode::Value);
    CellValue failure;
    auto x = fn.number(0, failure);
    if (!x) return failure;
    double digits = 0;
    if (fn.argc() == 2) {
        auto d = fn.number(1, failure);
        if (!d) return failure;
        digits = *d;
    }
    return finite_number(round_half_away(*x, static_cast<int>(std::trunc(digits))));
}

EvalResult fn_abs(const Fn& fn) {
    if (fn.argc() != 1) return err(ErrorCode::Value);
    CellValue failure;
    auto x = fn.number(0, failure);
    if (!x) return failure;
    return finite_number(std::fabs(*x));
}

EvalResult fn_if(const Fn& fn) {
    if (fn.argc() < 2 || fn.argc() > 3) return err(ErrorCode::Value);
    CellValue failure;
    auto cond = fn.boolean(0, failure);
    if (!cond) return failure;
    if (*cond) return fn.eval(1);
    if (fn.argc() == 3) return fn.eval(2);
    return CellValue::boolean(false);
}

EvalResult fn_iferror(const Fn& fn) {
    if (fn.argc() != 2) return err(ErrorCode::Value);
    EvalResult first = fn.eval(0);
    if (const CellValue* v = std::get_if<CellValue>(&first); v && v->is_error()) return fn.eval(1);
    return first;
}

EvalResult fn_andor(const Fn& fn, bool is_and) {
    if (fn.argc() == 0) return err(ErrorCode::Value);
    bool acc = is_and;
    bool any = false;
    for (std::size_t i = 0; i < fn.argc(); ++i) {
        EvalResult r = fn.eval(i);
        if (Matrix* m = std::get_if<Matrix>(&r)) {
            for (const CellValue& v : m->cells) {
                if (v.is_error()) return v;
                if (v.is_boolean() || numeric_kind(v)) {
                    bool b = v.is_boolean() ? v.as_boolean() : numeric_value(v) != 0;
                    acc = is_and ? (acc && b) : (acc || b);
                    any = true;
                }
            }
        } else {
            const CellValue& v = std::get<CellValue>(r);
            if (v.is_empty()) continue;
            auto b = to_boolean(v);
            if (ErrorCode* e = std::get_if<ErrorCode>(&b)) return err(*e);
            acc = is_and ? (acc && std::get<bool>(b)) : (acc || std::get<bool>(b));
            any = true;
        }
    }
    if (!any) return err(ErrorCode::Value);
    return CellValue::boolean(acc);
}

EvalResult fn_not(const Fn& fn) {
    if (fn.argc() != 1) return err(ErrorCode::Value);
    CellValue failure;
    auto b = fn.boolean(0, failure);
    if (!b) return failure;
    return CellValue::boolean(!*b);
}

EvalResult fn_concatenate(const Fn& fn) {
    std::string out;
    CellValue failure;
    for (std::size_t i = 0; i < fn.argc(); ++i) {
        auto piece = fn.text(i, failure);
        if (!piece) return failure;
        out += *piece;
    }
    return CellValue::text(std::move(out));
}

EvalResult fn_leftright(const Fn& fn, bool left) {
    if (fn.argc() < 1 || fn.argc() > 2) return err(ErrorCode::Value);
    CellValue failure;
    auto text = fn.text(0, failure);
    if (!text) return failure;
    double n = 1;
    if (fn.argc() == 2) {
        auto count = fn.number(1, failure);
        if (!count) return failure;
        n = std::trunc(*count);
    }
    if (n < 0) return err(ErrorCode::Value);
    auto offsets = cp_offsets(*text);
    std::size_t total = offsets.size() - 1;
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n), total);
    if (left) return CellValue::text(text->substr(0, offsets[take]));
    return CellValue::text(text->substr(offsets[total - take]));
}

EvalResult fn_mid(const Fn& fn) {
    if (fn.argc() != 3) return err(ErrorCode::Value);
    CellValue failure;
    auto text = fn.text(0, failure);
    if (!text) return failure;
    auto start = fn.number(1, failure);
    if (!start) return failure;
    auto len = fn.number(2, failure);
    if (!len) return failure;
    double s = std::trunc(*start), l = std::trunc(*len);
    if (s < 1 || l < 0) return err(ErrorCode::Value);
    auto offsets = cp_offsets(*text);
    std::size_t total = offsets.size() - 1;
    std::size_t begin = std::min<std::size_t>(static_cast<std::size_t>(s) - 1, total);
    std::size_t end = std::min<std::size_t>(begin + static_cast<std::size_t>(l), total);
    return CellValue::text(text->substr(offsets[begin], offsets[end] - offsets[begin]));
}

EvalResult fn_len(const Fn& fn) {
    if (fn.argc() != 1) return err(ErrorCode::Value);
    CellValue failure;
    auto text = fn.text(0, failure);
    if (!text) return failure;
    return CellValue::number(static_cast<double>(cp_offsets(*text).size() - 1));
}

EvalResult fn_trim(const Fn& fn) {
    if (fn.argc() != 1) return err(ErrorCode::Value);
    CellValue failure;
    auto text = fn.text(0, failure);
    if (!text) return failure;
    std::string out;
    bool pending_space = false;
    for (char c : *text) {
        if (c == ' ') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += c;
    }
    return CellValue::text(std::move(out));
}

EvalResult fn_case(const Fn& fn, bool upper) {
    if (fn.argc() != 1) return err(ErrorCode::Value);
    CellValue failure;
    auto text = fn.text(0, failure);
    if (!text) return failure;
    for (char& c : *text) {
        c = upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                  : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return CellValue::text(std::move(*text));
}

std::string group_thousands(double rounded) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.0f", std::fabs(rounded));
    std::string digits(buf);
    std::string grouped;
    int run = 0;
    for (std::size_t i = digits.size(); i-- > 0;) {
        grouped += digits[i];
        if (++run == 3 && i > 0) {
            grouped += ',';
            run = 0;
        }
    }
    std::reverse(grouped.begin(), grouped.end());
    if (rounded < 0) grouped.insert(grouped.begin(), '-');
    return grouped;
}

EvalResult fn_text(const Fn& fn) {
    if (fn.argc() != 2) return err(ErrorCode::Value);
    CellValue failure;
    auto fmt = fn.text(1, failure);
    if (!fmt) return failure;
    auto x = fn.number(0, failure);
    if (!x) return failure;

    char buf[64];
    if (*fmt == "0") {
        std::snprintf(buf, sizeof buf, "%.0f", round_half_away(*x, 0));
        return CellValue::text(buf);
    }
    if (*fmt == "0.00") {
        std::snprintf(buf, sizeof buf, "%.2f", round_half_away(*x, 2));
        return CellValue::text(buf);
    }
    if (*fmt == "#,##0") return CellValue::text(group_thousands(round_half_away(*x, 0)));
    if (*fmt == "yyyy-mm-dd") {
        if (*x < 0) return err(ErrorCode::Num);
        DateTime dt = datetime_from_serial(*x);
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", dt.year, dt.month, dt.day);
        return CellValue::text(buf);
    }
    if (*fmt == "hh:mm") {
        double frac = *x - std::floor(*x);
        TimeOfDay t = time_from_fraction(frac);
        std::snprintf(buf, sizeof buf, "%02d:%02d", t.hour, t.minute);
        return CellValue::text(buf);
    }
    return err(ErrorCode::Value); // outside the supported code subset
}

EvalResult fn_lookup(const Fn& fn, bool vertical) {
    if (fn.argc() < 3 || fn.argc() > 4) return err(ErrorCode::Value);
    CellValue key = fn.scalar(0);
    if (key.is_error()) return key;
    Matrix table = fn.matrix(1);
    CellValue failure;
    auto index = fn.number(2, failure);
    if (!index) return failure;
    int pick = static_cast<int>(std::trunc(*index));
    int lanes = vertical ? table.cols : table.rows; // width of each entry
    int entries = vertical ? table.rows : table.cols;
    if (pick < 1) return err(ErrorCode::Value);
    if (pick > lanes) return err(ErrorCode::Ref);
    bool approx = true;
    if (fn.argc() == 4) {
        auto flag = fn.boolean(3, failure);
        if (!flag) return failure;
        approx = *flag;
    }

    auto key_at = [&](int entry) -> const CellValue& {
        return vertical ? table.at(entry, 0) : table.at(0, entry);
    };
    auto value_at = [&](int entry) -> const CellValue& {
        return vertical ? table.at(entry, pick - 1) : table.at(pick - 1, entry);
    };

    if (!approx) {
        for (int i = 0; i < entries; ++i) {
            if (lookup_equal(key, key_at(i))) return present_or_zero(value_at(i));
        }
        return err(ErrorCode::NA);
    }
    int best = -1;
    for (int i = 0; i < entries; ++i) {
        const CellValue& cell = key_at(i);
        if (!same_kind(key, cell)) continue;
        if (compare_values(cell, key) <= 0) best = i;
    }
    if (best < 0) return err(ErrorCode::NA);
    return present_or_zero(value_at(best));
}

EvalResult fn_index(const Fn& fn) {
    if (fn.argc() < 2 || fn.argc() > 3) return err(ErrorCode::Value);
    Matrix m = fn.matrix(0);
    CellValue failure;
    auto first = fn.number(1, failure);
    if (!first) return failure;
    int row = static_cast<int>(std::trunc(*first));

    if (fn.argc() == 2) {
        // Single index: walks a vector, or picks a whole row of a matrix.
        if (m.rows == 1 && m.cols > 1) {
            if (row < 1 || row > m.cols) return err(ErrorCode::Ref);
            return present_or_zero(m.at(0, row - 1));
        }
        if (m.cols == 1) {
            if (row < 1 || row > m.rows) return err(ErrorCode::Ref);
            return present_or_zero(m.at(row - 1, 0));
        }
        if (row < 1 || row > m.rows) return err(ErrorCode::Ref);
        Matrix out = Matrix::sized(1, m.cols);
        for (int c = 0; c < m.cols; ++c) out.at(0, c) = m.at(row - 1, c);
        return out;
    }

    auto second = fn.number(2, failure);
    if (!second) return failure;
    int col = static_cast<int>(std::trunc(*second));
    if (row < 0 || col < 0 || row > m.rows || col > m.cols) return err(ErrorCode::Ref);
    if (row == 0 && col == 0) return m;
    if (row == 0) {
        if (col < 1) return err(ErrorCode::Ref);
        Matrix out = Matrix::sized(m.rows, 1);
        for (int r = 0; r < m.rows; ++r) out.at(r, 0) = m.at(r, col - 1);
        return out;
    }
    if (col == 0) {
        Matrix out = Matrix::sized(1, m.cols);
        for (int c = 0; c < m.cols; ++c) out.at(0, c) = m.at(row - 1, c);
        return out;
    }
    return present_or_zero(m.at(row - 1, col - 1));
}

EvalResult fn_match(const Fn& fn) {
    if (fn.argc() < 2 || fn.argc() > 3) return err(ErrorCode::Value);
    CellValue key = fn.scalar(0);
    if (key.is_error()) return key;
    Matrix m = fn.matrix(1);
    if (m.rows != 1 && m.cols != 1) return err(ErrorCode::NA);
    int n = m.rows == 1 ? m.cols : m.rows;
    auto at = [&](int i) -> const CellValue& { return m.rows == 1 ? m.at(0, i) : m.at(i, 0); };

    double type = 1;
    if (fn.argc() == 3) {
        CellValue failure;
        auto t = fn.number(2, failure);
        if (!t) return failure;
        type = *t;
    }

    if (type == 0) {
        for (int i = 0; i < n; ++i)
            if (lookup_equal(key, at(i))) return CellValue::number(i + 1);
        return err(ErrorCode::NA);
    }
    // type > 0 wants the last prefix element ≤ key on an ascending vector;
    // type < 0 the last prefix element ≥ key on a descending one.
    int best = -1;
    for (int i = 0; i < n; ++i) {
        const CellValue& cell = at(i);
        if (!same_kind(key, cell)) continue;
        int cmp = compare_values(cell, key);
        if (type > 0 ? cmp <= 0 : cmp >= 0)
            best = i;
        else
            break;
    }
    if (best < 0) return err(ErrorCode::NA);
    return CellValue::number(best + 1);
}

EvalResult fn_sumif(const Fn& fn, bool counting) {
    std::size_t max_args = counting ? 2 : 3;
    if (fn.argc() < 2 || fn.argc() > max_args) return err(ErrorCode::Value);
    auto range = resolve_range(fn.arg(0), *fn.call.ctx);
    if (!range) return err(ErrorCode::Value); // needs a literal reference argument
    if (!range->sheet) return err(ErrorCode::Ref);
    CellValue raw = fn.scalar(1);
    if (raw.is_error()) return raw;
    Criteria criteria = parse_criteria(raw);

    CellPos sum_origin = range->range.top_left.pos();
    const Worksheet* sum_sheet = range->sheet;
    if (!counting && fn.argc() == 3) {
        auto sum_range = resolve_range(fn.arg(2), *fn.call.ctx);
        if (!sum_range) return err(ErrorCode::Value);
        if (!sum_range->sheet) return err(ErrorCode::Ref);
        sum_origin = sum_range->range.top_left.pos();
        sum_sheet = sum_range->sheet;
    }

    double sum = 0;
    int count = 0;
    const RangeRef& r = range->range;
    for (int row = r.top_left.row; row <= r.bottom_right.row; ++row) {
        for (int col = r.top_left.col; col <= r.bottom_right.col; ++col) {
            CellValue cell = range->sheet->value_at(CellPos{row, col});
            if (!criteria_match(cell, criteria)) continue;
            ++count;
            if (counting) continue;
            CellPos spos{sum_origin.row + (row - r.top_left.row),
                         sum_origin.col + (col - r.top_left.col)};
            CellValue v = sum_sheet->value_at(spos);
            if (v.is_error()) return v;
            if (numeric_kind(v)) sum += numeric_value(v);
        }
    }
    return counting ? CellValue::number(count) : finite_number(sum);
}

EvalResult fn_today(const Fn& fn) {
    if (fn.argc() != 0) return err(ErrorCode::Value);
    DateTime today = fn.call.ctx->today;
    today.hour = today.minute = today.second = 0;
    return CellValue::datetime(today);
}

EvalResult fn_date(const Fn& fn) {
    if (fn.argc() != 3) return err(ErrorCode::Value);
    CellValue failure;
    auto y = fn.number(0, failure);
    if (!y) return failure;
    auto m = fn.number(1, failure);
    if (!m) return failure;
    auto d = fn.number(2, failure);
    if (!d) return failure;
    return make_date(*y, *m, *d);
}

// ---------------------------------------------------------------------------
// Dynamic-array functions.

EvalResult fn_filter(const Fn& fn) {
    if (fn.argc() < 2 || fn.argc() > 3) return err(ErrorCode::Value);
    Matrix data = fn.matrix(0);
    Matrix include = fn.matrix(1);

    auto truthy = [](const CellValue& v) -> std::variant<bool, ErrorCode> {
        if (v.is_error()) return v.as_error();
        if (v.is_boolean()) return v.as_boolean();
        if (numeric_kind(v)) return numeric_value(v) != 0;
        return ErrorCode::Value;
    };

    bool by_rows;
    if (include.cols == 1 && include.rows == data.rows)
        by_rows = true;
    else if (include.rows == 1 && include.cols == data.cols)
        by_rows = false;
    else
        return err(ErrorCode::Value);

    std::vector<int> keep;
    int n = by_rows ? data.rows : data.cols;
    for (int i = 0; i < n; ++i) {
        auto t = truthy(by_rows ? include.at(i, 0) : include.at(0, i));
        if (ErrorCode* e = std::get_if<ErrorCode>(&t)) return err(*e);
        if (std::get<bool>(t)) keep.push_back(i);
    }

    if (keep.empty()) {
        // No #CALC! in the error set; a missing if_empty argument is #VALUE!.
        if (fn.argc() == 3) return fn.scalar(2);
        return err(ErrorCode::Value);
    }

    Matrix out = by_rows ? Matrix::sized(static_cast<int>(keep.size()), data.cols)
                         : Matrix::sized(data.rows, static_cast<int>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        if (by_rows)
            for (int c = 0; c < data.cols; ++c) out.at(static_cast<int>(k), c) = data.at(keep[k], c);
        else
            for (int r = 0; r < data.rows; ++r) out.at(r, static_cast<int>(k)) = data.at(r, keep[k]);
    }
    return out;
}

bool rows_equal_ci(const Matrix& m, int a, int b) {
    for (int c = 0; c < m.cols; ++c) {
        const CellValue& x = m.at(a, c);
        const CellValue& y = m.at(b, c);
        if (x.is_text() && y.is_text()) {
            if (!ci_equal(x.as_text(), y.as_text())) return false;
        } else if (!(x == y)) {
            return false;
        }
    }
    return true;
}

EvalResult fn_unique(const Fn& fn) {
    if (fn.argc() != 1) return err(ErrorCode::Value);
    Matrix data = fn.matrix(0);
    std::vector<int> keep;
    for (int r = 0; r < data.rows; ++r) {
        bool seen = false;
        for (int k : keep) {
            if (rows_equal_ci(data, r, k)) {
                seen = true;
                break;
            }
        }
        if (!seen) keep.push_back(r);
    }
    Matrix out = Matrix::sized(static_cast<int>(keep.size()), data.cols);
    for (std::size_t k = 0; k < keep.size(); ++k)
        for (int c = 0; c < data.cols; ++c) out.at(static_cast<int>(k), c) = data.at(keep[k], c);
    return out;
}

EvalResult fn_sort(const Fn& fn) {
    if (fn.argc() < 1 || fn.argc() > 4) return err(ErrorCode::Value);
    Matrix data = fn.matrix(0);
    CellValue failure;
    int index = 1, order = 1;
    bool by_col = false;
    if (fn.argc() >= 2) {
        auto i = fn.number(1, failure);
        if (!i) return failure;
        index = static_cast<int>(std::trunc(*i));
    }
    if (fn.argc() >= 3) {
        auto o = fn.number(2, failure);
        if (!o) return failure;
        order = static_cast<int>(std::trunc(*o));
        if (order != 1 && order != -1) return err(ErrorCode::Value);
    }
    if (fn.argc() == 4) {
        auto b = fn.boolean(3, failure);
        if (!b) return failure;
        by_col = *b;
    }
    int lanes = by_col ? data.rows : data.cols;
    int n = by_col ? data.cols : data.rows;
    if (index < 1 || index > lanes) return err(ErrorCode::Value);

    auto key = [&](int i) -> const CellValue& {
        return by_col ? data.at(index - 1, i) : data.at(i, index - 1);
    };
    // Blanks sort to the end in both directions; errors just before them.
    auto bucket = [](const CellValue& v) { return v.is_empty() ? 2 : v.is_error() ? 1 : 0; };
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
        const CellValue& x = key(a);
        const CellValue& y = key(b);
        int bx = bucket(x), by = bucket(y);
        if (bx != by) return bx < by;
        if (bx != 0) return false;
        return order > 0 ? compare_values(x, y) < 0 : compare_values(y, x) < 0;
    });

    Matrix out = Matrix::sized(data.rows, data.cols);
    for (int i = 0; i < n; ++i) {
        if (by_col)
            for (int r = 0; r < data.rows; ++r) out.at(r, i) = data.at(r, perm[i]);
        else
            for (int c = 0; c < data.cols; ++c) out.at(i, c) = data.at(perm[i], c);
    }
    return out;
}

EvalResult fn_take(const Fn& fn) {
    if (fn.argc() < 2 || fn.argc() > 3) return err(ErrorCode::Value);
    Matrix data = fn.matrix(0);
    CellValue failure;
    auto r = fn.number(1, failure);
    if (!r) return failure;
    int rows = static_cast<int>(std::trunc(*r));
    int cols = data.cols;
    bool cols_from_end = false;
    if (fn.argc() == 3) {
        auto c = fn.number(2, failure);
        if (!c) return failure;
        cols = static_cast<int>(std::trunc(*c));
        if (cols == 0) return err(ErrorCode::Value);
        cols_from_end = cols < 0;
        cols = std::min(std::abs(cols), data.cols);
    }
    if (rows == 0) return err(ErrorCode::Value);
    bool rows_from_end = rows < 0;
    rows = std::min(std::abs(rows), data.rows);

    Matrix out = Matrix::sized(rows, cols);
    int r0 = rows_from_end ? data.rows - rows : 0;
    int c0 = cols_from_end ? data.cols - cols : 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out.at(i, j) = data.at(r0 + i, c0 + j);
    return out;
}

using Handler = EvalResult (*)(const Fn&);

const std::unordered_map<std::string_view, Handler>& registry() {
    static const std::unordered_map<std::string_view, Handler> map = {
        {"SUM", fn_sum},
        {"AVERAGE", fn_average},
        {"COUNT", fn_count},
        {"COUNTA", fn_counta},
        {"MIN", [](const Fn& f) { return fn_minmax(f, false); }},
        {"MAX", [](const Fn& f) { return fn_minmax(f, true); }},
        {"ROUND", fn_round},
        {"ABS", fn_abs},
        {"IF", fn_if},
        {"AND", [](const Fn& f) { return fn_andor(f, true); }},
        {"OR", [](const Fn& f) { return fn_andor(f, false); }},
        {"NOT", fn_not},
        {"IFERROR", fn_iferror},
        {"CONCATENATE", fn_concatenate},
        {"LEFT", [](const Fn& f) { return fn_leftright(f, true); }},
        {"RIGHT", [](const Fn& f) { return fn_leftright(f, false); }},
        {"MID", fn_mid},
        {"LEN", fn_len},
        {"TRIM", fn_trim},
        {"UPPER", [](const Fn& f) { return fn_case(f, true); }},
        {"LOWER", [](const Fn& f) { return fn_case(f, false); }},
        {"TEXT", fn_text},
        {"VLOOKUP", [](const Fn& f) { return fn_lookup(f, true); }},
        {"HLOOKUP", [](const Fn& f) { return fn_lookup(f, false); }},
        {"INDEX", fn_index},
        {"MATCH", fn_match},
        {"SUMIF", [](const Fn& f) { return fn_sumif(f, false); }},
        {"COUNTIF", [](const Fn& f) { return fn_sumif(f, true); }},
        {"TODAY", fn_today},
        {"DATE", fn_date},
        {"FILTER", fn_filter},
        {"UNIQUE", fn_unique},
        {"SORT", fn_sort},
        {"TAKE", fn_take},
    };
    return map;
}

} // namespace

bool function_known(std::string_view name) { return registry().count(name) > 0; }

EvalResult dispatch_function(const FunctionCall& call) {
    auto it = registry().find(call.name);
    if (it == registry().end()) return err(ErrorCode::Name);
    Fn fn{call};
    return it->second(fn);
}

std::variant<double, ErrorCode> to_number(const CellValue& v) {
    if (v.is_error()) return v.as_error();
    if (v.is_empty()) return 0.0;
    if (v.is_boolean()) return v.as_boolean() ? 1.0 : 0.0;
    if (numeric_kind(v)) return numeric_value(v);
    if (auto n = parse_full_number(v.as_text())) return *n;
    return ErrorCode::Value;
}

std::variant<std::string, ErrorCode> to_text_value(const CellValue& v) {
    if (v.is_error()) return v.as_error();
    if (v.is_empty()) return std::string();
    if (v.is_text()) return v.as_text();
    if (v.is_boolean()) return std::string(v.as_boolean() ? "TRUE" : "FALSE");
    return format_number(numeric_value(v));
}

std::variant<bool, ErrorCode> to_boolean(const CellValue& v) {
    if (v.is_error()) return v.as_error();
    if (v.is_empty()) return false;
    if (v.is_boolean()) return v.as_boolean();
    if (numeric_kind(v)) return numeric_value(v) != 0;
    std::string_view s = v.as_text();
    if (ci_equal(s, "TRUE")) return true;
    if (ci_equal(s, "FALSE")) return false;
    if (auto n = parse_full_number(s)) return *n != 0;
    return ErrorCode::Value;
}

int compare_values(const CellValue& a, const CellValue& b) {
    auto rank = [](const CellValue& v) {
        if (numeric_kind(v)) return 0;
        if (v.is_text()) return 1;
        return 2; // booleans
    };
    if (a.is_empty() && b.is_empty()) return 0;
    if (a.is_empty()) return -compare_values(b, a);
    if (b.is_empty()) {
        // Empty adapts to the populated side's type.
        if (numeric_kind(a)) {
            double x = numeric_value(a);
            return x < 0 ? -1 : x > 0 ? 1 : 0;
        }
        if (a.is_text()) return a.as_text().empty() ? 0 : 1;
        return a.as_boolean() ? 1 : 0;
    }
    int ra = rank(a), rb = rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    if (ra == 0) {
        double x = numeric_value(a), y = numeric_value(b);
        return x < y ? -1 : x > y ? 1 : 0;
    }
    if (ra == 1) return ci_compare(a.as_text(), b.as_text());
    return static_cast<int>(a.as_boolean()) - static_cast<int>(b.as_boolean());
}

CellValue make_date(double year, double month, double day) {
    if (!std::isfinite(year) || !std::isfinite(month) || !std::isfinite(day))
        return err(ErrorCode::Num);
    long long y = static_cast<long long>(std::floor(year));
    long long m = static_cast<long long>(std::floor(month));
    long long d = static_cast<long long>(std::floor(day));
    if (y < 0 || y > 9999) return err(ErrorCode::Num);
    if (y <= 1899) y += 1900; // spreadsheet two/three-digit year convention
    long long months = y * 12 + (m - 1);
    long long ny = months >= 0 ? months / 12 : -((-months + 11) / 12);
    int nm = static_cast<int>(months - ny * 12) + 1;
    if (ny < 1900 || ny > 9999) return err(ErrorCode::Num);
    std::int64_t serial =
        excel_serial_days(DateTime{static_cast<int>(ny), nm, 1, 0, 0, 0}) + (d - 1);
    if (serial < 1) return err(ErrorCode::Num);
    DateTime dt = datetime_from_serial(static_cast<double>(serial));
    if (dt.year > 9999) return err(ErrorCode::Num);
    return CellValue::datetime(dt);
}

} // namespace sheetkit::formula
