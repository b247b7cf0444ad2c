#include "sheetkit/formula/printer.hpp"

#include "sheetkit/error.hpp"

namespace sheetkit::formula {

std::string_view to_string(UnaryOp op) {
    switch (op) {
        case UnaryOp::Plus: return "+";
        case UnaryOp::Minus: return "-";
        case UnaryOp::Percent: return "%";
    }
    return "?";
}

std::string_view to_string(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Pow: return "^";
        case BinaryOp::Concat: return "&";
        case BinaryOp::Eq: return "=";
        case BinaryOp::Ne: return "<>";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::Ge: return ">=";
    }
    return "?";
}

namespace {

// Binding strength; parenthesize any child that binds looser than its slot,
// and right children that bind equally (every binary operator is left-assoc).
int precedence(const Expr& e) {
    struct Visitor {
        int operator()(const Literal&) const { return 100; }
        int operator()(const Ref&) const { return 100; }
        int operator()(const Range&) const { return 100; }
        int operator()(const Call&) const { return 100; }
        int operator()(const ArrayLit&) const { return 100; }
        int operator()(const Unary& u) const {
            return u.op == UnaryOp::Percent ? 90 : 80;
        }
        int operator()(const Binary& b) const {
            switch (b.op) {
                case BinaryOp::Pow: return 70;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 60;
                case BinaryOp::Add:
                case BinaryOp::Sub: return 50;
                case BinaryOp::Concat: return 40;
                default: return 30; // comparisons
            }
        }
    };
    return std::visit(Visitor{}, e.node);
}

std::string print_scalar(const CellValue& v) {
    if (v.is_empty()) return "";
    if (v.is_number()) return exact_number_text(v.as_number());
    if (v.is_boolean()) return v.as_boolean() ? "TRUE" : "FALSE";
    if (v.is_error()) return std::string(to_string(v.as_error()));
    if (v.is_text()) {
        std::string out = "\"";
        for (char c : v.as_text()) {
            out += c;
            if (c == '"') out += '"';
        }
        out += '"';
        return out;
    }
    return render(v); // DateTime/TimeOfDay have no literal syntax
}

void print(const Expr& e, std::string& out);

void print_child(const Expr& child, int slot, bool parenthesize_equal, std::string& out) {
    int child_prec = precedence(child);
    bool parens = child_prec < slot || (parenthesize_equal && child_prec == slot);
    if (parens) out += '(';
    print(child, out);
    if (parens) out += ')';
}

void print(const Expr& e, std::string& out) {
    struct Visitor {
        std::string& out;
        const Expr& e;

        void operator()(const Literal& l) const { out += print_scalar(l.value); }
        void operator()(const Ref& r) const { out += to_a1(r.ref); }
        void operator()(const Range& r) const { out += to_a1(r.range); }
        void operator()(const Unary& u) const {
            int slot = precedence(e);
            if (u.op == UnaryOp::Percent) {
                print_child(*u.child, slot, false, out);
                out += '%';
            } else {
                out += to_string(u.op);
                print_child(*u.child, slot, false, out);
            }
        }
        void operator()(const Binary& b) const {
            int slot = precedence(e);
            print_child(*b.left, slot, false, out);
            out += to_string(b.op);
            print_child(*b.right, slot, true, out);
        }
        void operator()(const Call& c) const {
            out += c.name;
            out += '(';
            for (std::size_t i = 0; i < c.args.size(); ++i) {
                if (i) out += ',';
                print(*c.args[i], out);
            }
            out += ')';
        }
        void operator()(const ArrayLit& a) const {
            out += '{';
            for (std::size_t r = 0; r < a.rows.size(); ++r) {
                if (r) out += ';';
                for (std::size_t c = 0; c < a.rows[r].size(); ++c) {
                    if (c) out += ',';
                    out += print_scalar(a.rows[r][c]);
                }
            }
            out += '}';
        }
    };
    std::visit(Visitor{out, e}, e.node);
}

} // namespace

std::string print_formula(const Expr& e) {
    std::string out;
    print(e, out);
    return out;
}

bool equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    struct Visitor {
        const Expr& b;

        bool operator()(const Literal& l) const { return l.value == std::get<Literal>(b.node).value; }
        bool operator()(const Ref& r) const { return r.ref == std::get<Ref>(b.node).ref; }
        bool operator()(const Range& r) const { return r.range == std::get<Range>(b.node).range; }
        bool operator()(const Unary& u) const {
            const Unary& o = std::get<Unary>(b.node);
            return u.op == o.op && equal(*u.child, *o.child);
        }
        bool operator()(const Binary& bin) const {
            const Binary& o = std::get<Binary>(b.node);
            return bin.op == o.op && equal(*bin.left, *o.left) && equal(*bin.right, *o.right);
        }
        bool operator()(const Call& c) const {
            const Call& o = std::get<Call>(b.node);
            if (c.name != o.name || c.args.size() != o.args.size()) return false;
            for (std::size_t i = 0; i < c.args.size(); ++i)
                if (!equal(*c.args[i], *o.args[i])) return false;
            return true;
        }
        bool operator()(const ArrayLit& a) const { return a.rows == std::get<ArrayLit>(b.node).rows; }
    };
    return std::visit(Visitor{b}, a.node);
}

ExprPtr clone(const Expr& e) {
    struct Visitor {
        ExprPtr operator()(const Literal& l) const { return make_expr(Literal{l.value}); }
        ExprPtr operator()(const Ref& r) const { return make_expr(Ref{r.ref}); }
        ExprPtr operator()(const Range& r) const { return make_expr(Range{r.range}); }
        ExprPtr operator()(const Unary& u) const {
            return make_expr(Unary{u.op, clone(*u.child)});
        }
        ExprPtr operator()(const Binary& b) const {
            return make_expr(Binary{b.op, clone(*b.left), clone(*b.right)});
        }
        ExprPtr operator()(const Call& c) const {
            Call copy{c.name, {}};
            copy.args.reserve(c.args.size());
            for (const ExprPtr& arg : c.args) copy.args.push_back(clone(*arg));
            return make_expr(std::move(copy));
        }
        ExprPtr operator()(const ArrayLit& a) const { return make_expr(ArrayLit{a.rows}); }
    };
    return std::visit(Visitor{}, e.node);
}

} // namespace sheetkit::formula
