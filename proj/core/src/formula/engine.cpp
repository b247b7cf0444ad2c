#include "sheetkit/formula/engine.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <functional>
#include <map>

#include "sheetkit/error.hpp"
#include "sheetkit/formula/functions.hpp"
#include "sheetkit/formula/parser.hpp"

namespace sheetkit::formula {

namespace {

// Ranges larger than this clamp toward the sheet's used extent; anything
// still larger refuses to materialize.
constexpr std::int64_t kClampThresholdCells = 65536;
constexpr std::int64_t kMatrixCellCap = std::int64_t(1) << 22;

CellValue err(ErrorCode code) { return CellValue::error(code); }

CellValue finite_number(double x) {
    return std::isfinite(x) ? CellValue::number(x) : err(ErrorCode::Num);
}

const Worksheet* lookup_sheet(EvalContext& ctx, std::string_view name) {
    return ctx.workbook->sheet(name.empty() ? std::string_view(ctx.home_sheet) : name);
}

ResolvedRange resolve(const Ref& r, EvalContext& ctx) {
    ResolvedRange out;
    out.sheet = lookup_sheet(ctx, r.ref.sheet ? *r.ref.sheet : std::string_view());
    out.range = RangeRef::single("", r.ref.row, r.ref.col);
    return out;
}

ResolvedRange resolve(const Range& g, EvalContext& ctx) {
    ResolvedRange out;
    out.sheet = lookup_sheet(ctx, g.range.sheet);
    out.range = g.range;
    out.range.normalize();
    if (!out.sheet) return out;
    RangeRef& r = out.range;
    if (r.whole_col) {
        r.top_left.row = 1;
        r.bottom_right.row = std::max(1, out.sheet->max_row());
        r.whole_col = false;
    }
    if (r.whole_row) {
        r.top_left.col = 1;
        r.bottom_right.col = std::max(1, out.sheet->max_col());
        r.whole_row = false;
    }
    if (r.area() > kClampThresholdCells) {
        r.bottom_right.row = std::clamp(out.sheet->max_row(), r.top_left.row, r.bottom_right.row);
        r.bottom_right.col = std::clamp(out.sheet->max_col(), r.top_left.col, r.bottom_right.col);
    }
    return out;
}

bool guarded(EvalContext& ctx, const Worksheet& ws, CellPos pos) {
    return ctx.guard && ctx.guard->count({ws.name(), pos}) > 0;
}

// --- operators -------------------------------------------------------------

CellValue apply_unary(UnaryOp op, const CellValue& v) {
    if (op == UnaryOp::Plus) return v; // no coercion, mirrors spreadsheet '+'
    if (v.is_error()) return v;
    auto n = to_number(v);
    if (ErrorCode* e = std::get_if<ErrorCode>(&n)) return err(*e);
    double x = std::get<double>(n);
    return op == UnaryOp::Minus ? finite_number(-x) : finite_number(x / 100.0);
}

CellValue apply_binary(BinaryOp op, const CellValue& a, const CellValue& b) {
    if (a.is_error()) return a;
    if (b.is_error()) return b;
    switch (op) {
        case BinaryOp::Add:
        case BinaryOp::Sub:
        case BinaryOp::Mul:
        case BinaryOp::Div:
        case BinaryOp::Pow: {
            auto na = to_number(a);
            if (ErrorCode* e = std::get_if<ErrorCode>(&na)) return err(*e);
            auto nb = to_number(b);
            if (ErrorCode* e = std::get_if<ErrorCode>(&nb)) return err(*e);
            double x = std::get<double>(na), y = std::get<double>(nb);
            switch (op) {
                case BinaryOp::Add: return finite_number(x + y);
                case BinaryOp::Sub: return finite_number(x - y);
                case BinaryOp::Mul: return finite_number(x * y);
                case BinaryOp::Div:
                    if (y == 0) return err(ErrorCode::Div0);
                    return finite_number(x / y);
                default:
                    if (x == 0 && y == 0) return err(ErrorCode::Num);
                    if (x == 0 && y < 0) return err(ErrorCode::Div0);
                    return finite_number(std::pow(x, y));
            }
        }
        case BinaryOp::Concat: {
            auto ta = to_text_value(a);
            if (ErrorCode* e = std::get_if<ErrorCode>(&ta)) return err(*e);
            auto tb = to_text_value(b);
            if (ErrorCode* e = std::get_if<ErrorCode>(&tb)) return err(*e);
            return CellValue::text(std::get<std::string>(std::move(ta)) +
                                   std::get<std::string>(std::move(tb)));
        }
        default: {
            int cmp = compare_values(a, b);
            switch (op) {
                case BinaryOp::Eq: return CellValue::boolean(cmp == 0);
                case BinaryOp::Ne: return CellValue::boolean(cmp != 0);
                case BinaryOp::Lt: return CellValue::boolean(cmp < 0);
                case BinaryOp::Le: return CellValue::boolean(cmp <= 0);
                case BinaryOp::Gt: return CellValue::boolean(cmp > 0);
                default: return CellValue::boolean(cmp >= 0);
            }
        }
    }
}

// Elementwise application with size-1 axes stretched; mismatched axes are a
// whole-result #VALUE!.
EvalResult broadcast(BinaryOp op, const EvalResult& lhs, const EvalResult& rhs) {
    const Matrix* ml = std::get_if<Matrix>(&lhs);
    const Matrix* mr = std::get_if<Matrix>(&rhs);
    if (!ml && !mr) return apply_binary(op, std::get<CellValue>(lhs), std::get<CellValue>(rhs));
    int lr = ml ? ml->rows : 1, lc = ml ? ml->cols : 1;
    int rr = mr ? mr->rows : 1, rc = mr ? mr->cols : 1;
    if ((lr != rr && lr != 1 && rr != 1) || (lc != rc && lc != 1 && rc != 1))
        return err(ErrorCode::Value);
    Matrix out = Matrix::sized(std::max(lr, rr), std::max(lc, rc));
    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < out.cols; ++j) {
            const CellValue& a =
                ml ? ml->at(lr == 1 ? 0 : i, lc == 1 ? 0 : j) : std::get<CellValue>(lhs);
            const CellValue& b =
                mr ? mr->at(rr == 1 ? 0 : i, rc == 1 ? 0 : j) : std::get<CellValue>(rhs);
            out.at(i, j) = apply_binary(op, a, b);
        }
    }
    return out;
}

struct Evaluator {
    EvalContext& ctx;

    EvalResult operator()(const Literal& l) { return l.value; }

    // A reference is a 1x1 matrix, not a bare scalar: aggregate functions key
    // cell-skipping rules off the distinction (SUM("5") counts the text,
    // SUM(A1) holding "5" does not).
    EvalResult operator()(const Ref& r) {
        const Worksheet* ws =
            lookup_sheet(ctx, r.ref.sheet ? *r.ref.sheet : std::string_view());
        if (!ws) return err(ErrorCode::Ref);
        Matrix m = Matrix::sized(1, 1);
        m.at(0, 0) = guarded(ctx, *ws, r.ref.pos()) ? err(ErrorCode::Circ)
                                                    : ws->value_at(r.ref.pos());
        return m;
    }

    EvalResult operator()(const Range& g) {
        ResolvedRange rr = resolve(g, ctx);
        if (!rr.sheet) return err(ErrorCode::Ref);
        const RangeRef& r = rr.range;
        if (r.area() > kMatrixCellCap) return err(ErrorCode::Value);
        Matrix m = Matrix::sized(r.height(), r.width());
        const auto& cells = rr.sheet->cells();
        for (auto it = cells.lower_bound(CellPos{r.top_left.row, 1});
             it != cells.end() && it->first.row <= r.bottom_right.row; ++it) {
            if (it->first.col < r.top_left.col || it->first.col > r.bottom_right.col) continue;
            m.at(it->first.row - r.top_left.row, it->first.col - r.top_left.col) =
                it->second.value;
        }
        if (ctx.guard) {
            for (const auto& [sheet, pos] : *ctx.guard) {
                if (sheet_name_equal(sheet, rr.sheet->name()) && r.contains(pos))
                    m.at(pos.row - r.top_left.row, pos.col - r.top_left.col) =
                        err(ErrorCode::Circ);
            }
        }
        return m;
    }

    EvalResult operator()(const Unary& u) {
        EvalResult child = evaluate(*u.child, ctx);
        if (Matrix* m = std::get_if<Matrix>(&child)) {
            for (CellValue& v : m->cells) v = apply_unary(u.op, v);
            return child;
        }
        return apply_unary(u.op, std::get<CellValue>(child));
    }

    EvalResult operator()(const Binary& b) {
        EvalResult lhs = evaluate(*b.left, ctx);
        EvalResult rhs = evaluate(*b.right, ctx);
        return broadcast(b.op, lhs, rhs);
    }

    EvalResult operator()(const Call& c) {
        FunctionCall fc;
        fc.name = c.name;
        fc.args = &c.args;
        fc.ctx = &ctx;
        fc.eval = [this](const Expr& e) { return evaluate(e, ctx); };
        return dispatch_function(fc);
    }

    EvalResult operator()(const ArrayLit& a) {
        Matrix m = Matrix::sized(static_cast<int>(a.rows.size()),
                                 static_cast<int>(a.rows.front().size()));
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) m.at(i, j) = a.rows[i][j];
        return m;
    }
};

DateTime utc_today() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    return DateTime{tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, 0, 0, 0};
}

// Tarjan's algorithm, iterative. Emits components dependency-first when
// edges point reader -> producer, which is exactly evaluation order.
std::vector<std::vector<int>> strongly_connected(const std::vector<std::vector<int>>& adj) {
    int n = static_cast<int>(adj.size());
    std::vector<int> index(n, -1), low(n, 0), stack;
    std::vector<char> on_stack(n, 0);
    std::vector<std::vector<int>> sccs;
    int counter = 0;

    struct Frame {
        int v;
        std::size_t edge = 0;
    };
    std::vector<Frame> frames;
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        frames.push_back({root});
        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.edge < adj[f.v].size()) {
                int w = adj[f.v][f.edge++];
                if (index[w] == -1) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    frames.push_back({w});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                int v = f.v;
                if (low[v] == index[v]) {
                    std::vector<int> scc;
                    int w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        scc.push_back(w);
                    } while (w != v);
                    sccs.push_back(std::move(scc));
                }
                frames.pop_back();
                if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
            }
        }
    }
    return sccs;
}

} // namespace

EvalResult evaluate(const Expr& ast, EvalContext& ctx) {
    return std::visit(Evaluator{ctx}, ast.node);
}

CellValue scalarize(const EvalResult& r) {
    if (const CellValue* v = std::get_if<CellValue>(&r)) return *v;
    const Matrix& m = std::get<Matrix>(r);
    if (m.rows == 1 && m.cols == 1) return m.at(0, 0);
    return err(ErrorCode::Value);
}

std::optional<ResolvedRange> resolve_range(const Expr& e, EvalContext& ctx) {
    if (const Ref* r = std::get_if<Ref>(&e.node)) return resolve(*r, ctx);
    if (const Range* g = std::get_if<Range>(&e.node)) return resolve(*g, ctx);
    return std::nullopt;
}

RecalcReport recalculate(Workbook& wb, const RecalcOptions& opts) {
    RecalcReport report;
    DateTime today = opts.today.value_or(utc_today());
    int deadline_tick = 0;
    auto check_deadline = [&](bool force = false) {
        if (!opts.deadline) return;
        if (!force && ++deadline_tick % 256 != 0) return;
        if (std::chrono::steady_clock::now() > *opts.deadline)
            throw Error("recalculation deadline exceeded");
    };

    constexpr int kMaxPasses = 64;
    report.converged = false;
    for (int pass = 0; pass < kMaxPasses; ++pass) {
        check_deadline(true);
        ++report.passes;

        std::vector<std::map<CellPos, Cell>> snapshot;
        snapshot.reserve(wb.sheets().size());
        for (const Worksheet& ws : wb.sheets()) snapshot.push_back(ws.cells());

        // Formula cells become graph nodes; unparseable formulas cache #NAME?.
        struct Node {
            int sheet;
            CellPos pos;
            ExprPtr ast;
        };
        std::vector<Node> nodes;
        std::map<std::pair<int, CellPos>, int> node_of;
        for (int s = 0; s < static_cast<int>(wb.sheets().size()); ++s) {
            for (auto& [pos, cell] : wb.sheets()[s].cells()) {
                if (!cell.formula) continue;
                cell.spill_origin.reset(); // formula cells are never spill slaves
                try {
                    ExprPtr ast = parse_formula(*cell.formula);
                    node_of[{s, pos}] = static_cast<int>(nodes.size());
                    nodes.push_back({s, pos, std::move(ast)});
                } catch (const ParseError&) {
                    cell.value = err(ErrorCode::Name);
                }
            }
        }

        // Dependency edges, reader -> producer. Reads landing on a spill
        // slave (as left by the previous pass) depend on the spill's origin;
        // that is what makes the outer fixed-point loop converge quickly.
        std::vector<std::vector<int>> adj(nodes.size());
        auto add_dep = [&](int reader, int sheet, CellPos pos) {
            const Cell* cell = wb.sheets()[sheet].find(pos);
            if (!cell) return;
            std::pair<int, CellPos> key{sheet, pos};
            if (!cell->formula && cell->spill_origin) key.second = *cell->spill_origin;
            auto it = node_of.find(key);
            if (it != node_of.end()) adj[reader].push_back(it->second);
        };
        auto sheet_index = [&](const Worksheet* ws) {
            return static_cast<int>(ws - wb.sheets().data());
        };

        EvalContext depctx{&wb, "", {1, 1}, today, nullptr};
        for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
            depctx.home_sheet = wb.sheets()[nodes[i].sheet].name();
            std::function<void(const Expr&)> walk = [&](const Expr& e) {
                if (const Ref* r = std::get_if<Ref>(&e.node)) {
                    const Worksheet* ws = lookup_sheet(
                        depctx, r->ref.sheet ? *r->ref.sheet : std::string_view());
                    if (ws) add_dep(i, sheet_index(ws), r->ref.pos());
                } else if (const Range* g = std::get_if<Range>(&e.node)) {
                    const Worksheet* ws = lookup_sheet(depctx, g->range.sheet);
                    if (!ws) return;
                    RangeRef r = g->range;
                    r.normalize();
                    const auto& cells = ws->cells();
                    for (auto it = cells.lower_bound(CellPos{r.top_left.row, 1});
                         it != cells.end() && it->first.row <= r.bottom_right.row; ++it) {
                        if (r.contains(it->first)) add_dep(i, sheet_index(ws), it->first);
                    }
                } else if (const Unary* u = std::get_if<Unary>(&e.node)) {
                    walk(*u->child);
                } else if (const Binary* b = std::get_if<Binary>(&e.node)) {
                    walk(*b->left);
                    walk(*b->right);
                } else if (const Call* c = std::get_if<Call>(&e.node)) {
                    for (const ExprPtr& arg : c->args) walk(*arg);
                }
            };
            walk(*nodes[i].ast);
        }

        // Clear the previous pass's spill results before re-evaluating.
        bool spill_activity = false;
        for (Worksheet& ws : wb.sheets()) {
            std::vector<CellPos> drop;
            for (auto& [pos, cell] : ws.cells()) {
                if (!cell.spill_origin) continue;
                spill_activity = true;
                cell.value = CellValue();
                cell.spill_origin.reset();
                if (!cell.has_content() && !cell.format) drop.push_back(pos);
            }
            for (CellPos pos : drop) ws.erase(pos);
        }

        std::vector<std::vector<int>> sccs = strongly_connected(adj);
        report.cycles.clear();
        for (const std::vector<int>& scc : sccs) {
            bool cyclic = scc.size() > 1;
            if (!cyclic) {
                int v = scc[0];
                cyclic = std::find(adj[v].begin(), adj[v].end(), v) != adj[v].end();
            }
            if (cyclic) {
                std::vector<std::string> addresses;
                for (int v : scc) {
                    Node& node = nodes[v];
                    Worksheet& ws = wb.sheets()[node.sheet];
                    ws.at(node.pos).value = err(ErrorCode::Circ);
                    addresses.push_back(ws.name() + "!" + to_a1(node.pos));
                }
                std::sort(addresses.begin(), addresses.end());
                report.cycles.push_back(std::move(addresses));
                continue;
            }

            Node& node = nodes[scc[0]];
            Worksheet& ws = wb.sheets()[node.sheet];
            check_deadline();
            EvalContext ctx{&wb, ws.name(), node.pos, today, nullptr};
            EvalResult result = evaluate(*node.ast, ctx);
            ++report.cells_evaluated;

            Matrix* m = std::get_if<Matrix>(&result);
            if (m && (m->rows > 1 || m->cols > 1)) {
                spill_activity = true;
                int last_row = node.pos.row + m->rows - 1;
                int last_col = node.pos.col + m->cols - 1;
                bool blocked = last_row > kMaxRow || last_col > kMaxCol;
                for (int r = node.pos.row; !blocked && r <= last_row; ++r) {
                    for (int c = node.pos.col; c <= last_col; ++c) {
                        if (r == node.pos.row && c == node.pos.col) continue;
                        const Cell* occupant = ws.find(CellPos{r, c});
                        if (occupant && (occupant->formula || occupant->spill_origin ||
                                         !occupant->value.is_empty())) {
                            blocked = true;
                            break;
                        }
                    }
                }
                if (blocked) {
                    ws.at(node.pos).value = err(ErrorCode::Spill);
                } else {
                    ws.at(node.pos).value = m->at(0, 0);
                    for (int r = 0; r < m->rows; ++r) {
                        for (int c = 0; c < m->cols; ++c) {
                            if (r == 0 && c == 0) continue;
                            Cell& slave = ws.at(CellPos{node.pos.row + r, node.pos.col + c});
                            slave.value = m->at(r, c);
                            slave.spill_origin = node.pos;
                        }
                    }
                }
            } else {
                ws.at(node.pos).value = scalarize(result);
            }
        }

        report.cycles.shrink_to_fit();
        std::sort(report.cycles.begin(), report.cycles.end());

        bool stable = true;
        for (std::size_t s = 0; s < wb.sheets().size(); ++s) {
            if (wb.sheets()[s].cells() != snapshot[s]) {
                stable = false;
                break;
            }
        }
        if (stable || !spill_activity) {
            report.converged = true;
            break;
        }
    }
    return report;
}

} // namespace sheetkit::formula
