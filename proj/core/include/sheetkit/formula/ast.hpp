#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "sheetkit/a1.hpp"
#include "sheetkit/value.hpp"

namespace sheetkit::formula {

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class UnaryOp { Plus, Minus, Percent };
enum class BinaryOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(UnaryOp op);
std::string_view to_string(BinaryOp op);

struct Literal {
    CellValue value;
};
struct Ref {
    CellRef ref;
};
struct Range {
    RangeRef range;
};
struct Unary {
    UnaryOp op;
    ExprPtr child;
};
struct Binary {
    BinaryOp op;
    ExprPtr left;
    ExprPtr right;
};
struct Call {
    std::string name; // uppercase-canonicalized
    std::vector<ExprPtr> args;
};
/// Constant array literal {1,2;"a",TRUE}: rectangular rows of scalar values.
struct ArrayLit {
    std::vector<std::vector<CellValue>> rows;
};

struct Expr {
    std::variant<Literal, Ref, Range, Unary, Binary, Call, ArrayLit> node;
};

template <typename Node>
ExprPtr make_expr(Node node) {
    return std::make_unique<Expr>(Expr{std::move(node)});
}

ExprPtr clone(const Expr& e);
bool equal(const Expr& a, const Expr& b);

} // namespace sheetkit::formula
