#include "sheetkit/formula/parser.hpp"

#include <cctype>
#include <charconv>

#include "sheetkit/error.hpp"

namespace sheetkit::formula {

namespace {

bool is_ref_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '$' || c == '_' || c == '.' ||
           c == ':';
}

bool ascii_equal_ci(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(a[i])) !=
            std::toupper(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

struct Parser {
    std::string_view text;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, pos); }

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    bool eat(char c) {
        if (peek() == c) {
            ++pos;
            return true;
        }
        return false;
    }

    void expect(char c, const char* what) {
        if (!eat(c)) fail(std::string("expected ") + what);
    }

    // ---- grammar, loosest first ----

    ExprPtr parse_expr() { return parse_comparison(); }

    ExprPtr parse_comparison() {
        ExprPtr left = parse_concat();
        for (;;) {
            skip_ws();
            BinaryOp op;
            if (match("<>"))
                op = BinaryOp::Ne;
            else if (match("<="))
                op = BinaryOp::Le;
            else if (match(">="))
                op = BinaryOp::Ge;
            else if (match("<"))
                op = BinaryOp::Lt;
            else if (match(">"))
                op = BinaryOp::Gt;
            else if (match("="))
                op = BinaryOp::Eq;
            else
                return left;
            left = make_expr(Binary{op, std::move(left), parse_concat()});
        }
    }

    ExprPtr parse_concat() {
        ExprPtr left = parse_additive();
        while (eat('&')) left = make_expr(Binary{BinaryOp::Concat, std::move(left), parse_additive()});
        return left;
    }

    ExprPtr parse_additive() {
        ExprPtr left = parse_multiplicative();
        for (;;) {
            if (eat('+'))
                left = make_expr(Binary{BinaryOp::Add, std::move(left), parse_multiplicative()});
            else if (eat('-'))
                left = make_expr(Binary{BinaryOp::Sub, std::move(left), parse_multiplicative()});
            else
                return left;
        }
    }

    ExprPtr parse_multiplicative() {
        ExprPtr left = parse_power();
        for (;;) {
            if (eat('*'))
                left = make_expr(Binary{BinaryOp::Mul, std::move(left), parse_power()});
            else if (eat('/'))
                left = make_expr(Binary{BinaryOp::Div, std::move(left), parse_power()});
            else
                return left;
        }
    }

    ExprPtr parse_power() {
        // '^' is left-associative and binds looser than unary minus, the
        // spreadsheet convention: -2^2 is 4, 2^3^2 is 64.
        ExprPtr left = parse_unary();
        while (eat('^')) left = make_expr(Binary{BinaryOp::Pow, std::move(left), parse_unary()});
        return left;
    }

    ExprPtr parse_unary() {
        if (eat('-')) return make_expr(Unary{UnaryOp::Minus, parse_unary()});
        if (eat('+')) return make_expr(Unary{UnaryOp::Plus, parse_unary()});
        return parse_postfix();
    }

    ExprPtr parse_postfix() {
        ExprPtr e = parse_primary();
        while (eat('%')) e = make_expr(Unary{UnaryOp::Percent, std::move(e)});
        return e;
    }

    bool match(std::string_view s) {
        skip_ws();
        if (text.substr(pos, s.size()) == s) {
            pos += s.size();
            return true;
        }
        return false;
    }

    ExprPtr parse_primary() {
        char c = peek();
        if (c == '\0') fail("unexpected end of formula");
        if (c == '(') {
            ++pos;
            ExprPtr inner = parse_expr();
            expect(')', "')'");
            return inner;
        }
        if (c == '"') return make_expr(Literal{CellValue::text(parse_string())});
        if (c == '{') return parse_array();
        if (c == '#') return make_expr(Literal{CellValue::error(parse_error_literal())});
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number_or_row_range();
        if (c == '\'') return parse_reference(parse_quoted_sheet());
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$')
            return parse_ident();
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string parse_string() {
        ++pos; // opening quote
        std::string out;
        while (pos < text.size()) {
            char c = text[pos++];
            if (c == '"') {
                if (pos < text.size() && text[pos] == '"') { // doubled quote
                    out += '"';
                    ++pos;
                    continue;
                }
                return out;
            }
            out += c;
        }
        fail("unterminated string literal");
    }

    ErrorCode parse_error_literal() {
        static constexpr std::string_view kCodes[] = {
            "#DIV/0!", "#VALUE!", "#SPILL!", "#NAME?", "#CIRC!", "#REF!", "#NUM!", "#N/A",
        };
        for (std::string_view code : kCodes) {
            if (text.substr(pos, code.size()) == code) {
                pos += code.size();
                return *sheetkit::parse_error_code(code);
            }
        }
        fail("unknown error literal");
    }

    double parse_number_literal() {
        double value = 0;
        const char* begin = text.data() + pos;
        const char* end = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr == begin) fail("bad number literal");
        pos += static_cast<std::size_t>(ptr - begin);
        return value;
    }

    ExprPtr parse_number_or_row_range() {
        std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        // Whole-row range "2:4".
        if (pos > start && pos < text.size() && text[pos] == ':') {
            std::size_t save = pos;
            ++pos;
            std::size_t second = pos;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
            if (pos > second) {
                std::string_view whole = text.substr(start, pos - start);
                try {
                    return ref_expr(parse_a1(whole), std::string());
                } catch (const Error& e) {
                    fail(e.what());
                }
            }
            pos = save;
        }
        pos = start;
        return make_expr(Literal{CellValue::number(parse_number_literal())});
    }

    std::string parse_quoted_sheet() {
        ++pos; // opening quote
        std::string name;
        while (pos < text.size()) {
            char c = text[pos++];
            if (c == '\'') {
                if (pos < text.size() && text[pos] == '\'') {
                    name += '\'';
                    ++pos;
                    continue;
                }
                if (pos < text.size() && text[pos] == '!') {
                    ++pos;
                    return name;
                }
                fail("quoted sheet name must be followed by '!'");
            }
            name += c;
        }
        fail("unterminated sheet name quote");
    }

    // A reference whose sheet prefix was already consumed ("" = no prefix).
    ExprPtr parse_reference(const std::string& sheet) {
        std::size_t start = pos;
        while (pos < text.size() && is_ref_char(text[pos])) ++pos;
        if (pos == start) fail("expected cell reference");
        std::string body(text.substr(start, pos - start));
        try {
            return ref_expr(parse_a1(body), sheet);
        } catch (const Error& e) {
            pos = start;
            fail(e.what());
        }
    }

    ExprPtr ref_expr(A1Target target, const std::string& sheet) {
        if (CellRef* ref = std::get_if<CellRef>(&target)) {
            if (!sheet.empty()) ref->sheet = sheet;
            return make_expr(Ref{*ref});
        }
        RangeRef range = std::get<RangeRef>(target);
        if (!sheet.empty()) range.sheet = sheet;
        // Degenerate 1x1 ranges ("A1:A1") canonicalize to a plain cell ref.
        if (range.area() == 1 && !range.whole_col && !range.whole_row) {
            CellRef ref = range.top_left;
            if (!range.sheet.empty()) ref.sheet = range.sheet;
            return make_expr(Ref{ref});
        }
        return make_expr(Range{std::move(range)});
    }

    ExprPtr parse_ident() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() && is_ref_char(text[pos]) && text[pos] != ':') ++pos;
        std::string_view token = text.substr(start, pos - start);

        std::size_t after = pos;
        if (peek() == '(') { // function call
            ++pos;
            std::string name(token);
            for (char& ch : name) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            if (name.find('$') != std::string::npos) {
                pos = start;
                fail("'$' is not valid in a function name");
            }
            std::vector<ExprPtr> args;
            if (!eat(')')) {
                for (;;) {
                    if (peek() == ',' || peek() == ')')
                        args.push_back(make_expr(Literal{CellValue::empty()}));
                    else
                        args.push_back(parse_expr());
                    if (eat(',')) continue;
                    expect(')', "')' to close the argument list");
                    break;
                }
            }
            return make_expr(Call{std::move(name), std::move(args)});
        }
        pos = after;

        // Sheet prefix first, so a sheet named TRUE still resolves as a sheet.
        pos = start;
        std::size_t scan = pos;
        while (scan < text.size() && is_ref_char(text[scan])) ++scan;
        if (scan < text.size() && text[scan] == '!') {
            std::string sheet(text.substr(pos, scan - pos));
            pos = scan + 1;
            return parse_reference(sheet);
        }

        if (ascii_equal_ci(token, "TRUE")) {
            pos = after;
            return make_expr(Literal{CellValue::boolean(true)});
        }
        if (ascii_equal_ci(token, "FALSE")) {
            pos = after;
            return make_expr(Literal{CellValue::boolean(false)});
        }
        return parse_reference(std::string());
    }

    ExprPtr parse_array() {
        ++pos; // '{'
        std::vector<std::vector<CellValue>> rows(1);
        for (;;) {
            rows.back().push_back(parse_array_scalar());
            if (eat(',')) continue;
            if (eat(';')) {
                rows.emplace_back();
                continue;
            }
            expect('}', "'}' to close the array literal");
            break;
        }
        std::size_t width = rows.front().size();
        for (const auto& row : rows) {
            if (row.size() != width) fail("array literal rows differ in length");
        }
        return make_expr(ArrayLit{std::move(rows)});
    }

    CellValue parse_array_scalar() {
        char c = peek();
        if (c == '"') return CellValue::text(parse_string());
        if (c == '#') return CellValue::error(parse_error_literal());
        if (c == '-' || c == '+' || c == '.' || std::isdigit(static_cast<unsigned char>(c)))
            return CellValue::number(parse_number_literal());
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos;
            while (pos < text.size() && std::isalpha(static_cast<unsigned char>(text[pos]))) ++pos;
            std::string_view token = text.substr(start, pos - start);
            if (ascii_equal_ci(token, "TRUE")) return CellValue::boolean(true);
            if (ascii_equal_ci(token, "FALSE")) return CellValue::boolean(false);
            pos = start;
        }
        fail("array literals hold only number, string, boolean, and error constants");
    }
};

} // namespace

ExprPtr parse_formula(std::string_view text) {
    Parser parser{text};
    ExprPtr root = parser.parse_expr();
    parser.skip_ws();
    if (parser.pos != text.size()) parser.fail("trailing characters after formula");
    return root;
}

} // namespace sheetkit::formula
