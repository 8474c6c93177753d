#include "reward_audit/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace reward_audit {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::kSyntaxError: return "SyntaxError";
        case ErrorCode::kUnknownFeature: return "UnknownFeature";
        case ErrorCode::kUnknownKey: return "UnknownKey";
        case ErrorCode::kMissingFeature: return "MissingFeature";
        case ErrorCode::kDivisionByZero: return "DivisionByZero";
        case ErrorCode::kInvalidClipBounds: return "InvalidClipBounds";
        case ErrorCode::kMissingPotential: return "MissingPotential";
        case ErrorCode::kNotEvaluable: return "NotEvaluable";
        case ErrorCode::kMissingScenarioParameter: return "MissingScenarioParameter";
        case ErrorCode::kEditOutOfRange: return "EditOutOfRange";
        case ErrorCode::kOrderingViolated: return "OrderingViolated";
        case ErrorCode::kUnknownEntry: return "UnknownEntry";
        case ErrorCode::kInvalidArgument: return "InvalidArgument";
    }
    return "?";
}

std::string_view to_string(BinaryOp op) {
    switch (op) {
        case BinaryOp::kAdd: return "+";
        case BinaryOp::kSub: return "-";
        case BinaryOp::kMul: return "*";
        case BinaryOp::kDiv: return "/";
    }
    return "?";
}

std::string_view to_string(CompareOp op) {
    switch (op) {
        case CompareOp::kLess: return "<";
        case CompareOp::kLessEqual: return "<=";
        case CompareOp::kEqual: return "==";
        case CompareOp::kGreaterEqual: return ">=";
        case CompareOp::kGreater: return ">";
    }
    return "?";
}

std::string_view to_string(Function fn) {
    switch (fn) {
        case Function::kMin: return "min";
        case Function::kMax: return "max";
        case Function::kAbs: return "abs";
        case Function::kClip: return "clip";
    }
    return "?";
}

namespace {

std::shared_ptr<const Expr::Node> make(Expr::Variant v, SourceLoc loc) {
    return std::make_shared<const Expr::Node>(Expr::Node{std::move(v), loc});
}

bool nodes_equal(const Expr::Node& a, const Expr::Node& b);

bool ptr_equal(const std::shared_ptr<const Expr::Node>& a, const std::shared_ptr<const Expr::Node>& b) {
    return a == b || nodes_equal(*a, *b);
}

bool nodes_equal(const Expr::Node& a, const Expr::Node& b) {
    if (a.value.index() != b.value.index()) return false;
    return std::visit(
        [&](const auto& x) -> bool {
            using T = std::decay_t<decltype(x)>;
            const auto& y = std::get<T>(b.value);
            if constexpr (std::is_same_v<T, Expr::Constant>) {
                return x.value == y.value;
            } else if constexpr (std::is_same_v<T, Expr::FeatureRef>) {
                return x.name == y.name;
            } else if constexpr (std::is_same_v<T, Expr::Negate>) {
                return ptr_equal(x.operand, y.operand);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                return x.op == y.op && ptr_equal(x.lhs, y.lhs) && ptr_equal(x.rhs, y.rhs);
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                if (x.fn != y.fn || x.args.size() != y.args.size()) return false;
                for (std::size_t i = 0; i < x.args.size(); ++i)
                    if (!ptr_equal(x.args[i], y.args[i])) return false;
                return true;
            } else {
                return x.cmp == y.cmp && ptr_equal(x.lhs, y.lhs) && ptr_equal(x.rhs, y.rhs) &&
                       ptr_equal(x.then_branch, y.then_branch) && ptr_equal(x.else_branch, y.else_branch);
            }
        },
        a.value);
}

bool compare(CompareOp op, double a, double b) {
    switch (op) {
        case CompareOp::kLess: return a < b;
        case CompareOp::kLessEqual: return a <= b;
        case CompareOp::kEqual: return a == b;
        case CompareOp::kGreaterEqual: return a >= b;
        case CompareOp::kGreater: return a > b;
    }
    return false;
}

[[noreturn]] void throw_div_zero(SourceLoc loc) {
    throw AuditError(ErrorCode::kDivisionByZero, "division by zero at " + detail::describe(loc));
}

double clip(double x, double lo, double hi, SourceLoc loc) {
    if (lo > hi) {
        throw AuditError(ErrorCode::kInvalidClipBounds,
                         "clip bounds require lo <= hi (got " + format_number(lo) + " > " + format_number(hi) +
                             ") at " + detail::describe(loc));
    }
    return std::min(std::max(x, lo), hi);
}

double eval_node(const Expr::Node& node, const FeatureEnv& env) {
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expr::Constant>) {
                return n.value;
            } else if constexpr (std::is_same_v<T, Expr::FeatureRef>) {
                auto it = env.find(n.name);
                if (it == env.end()) detail::throw_missing_feature(n.name);
                return it->second;
            } else if constexpr (std::is_same_v<T, Expr::Negate>) {
                return -eval_node(*n.operand, env);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                const double a = eval_node(*n.lhs, env);
                const double b = eval_node(*n.rhs, env);
                switch (n.op) {
                    case BinaryOp::kAdd: return a + b;
                    case BinaryOp::kSub: return a - b;
                    case BinaryOp::kMul: return a * b;
                    case BinaryOp::kDiv:
                        if (b == 0.0) throw_div_zero(node.loc);
                        return a / b;
                }
                return 0.0;
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                switch (n.fn) {
                    case Function::kAbs: return std::abs(eval_node(*n.args.at(0), env));
                    case Function::kClip:
                        return clip(eval_node(*n.args.at(0), env), eval_node(*n.args.at(1), env),
                                    eval_node(*n.args.at(2), env), node.loc);
                    case Function::kMin:
                    case Function::kMax: {
                        double acc = eval_node(*n.args.at(0), env);
                        for (std::size_t i = 1; i < n.args.size(); ++i) {
                            const double v = eval_node(*n.args[i], env);
                            acc = n.fn == Function::kMin ? std::min(acc, v) : std::max(acc, v);
                        }
                        return acc;
                    }
                }
                return 0.0;
            } else {
                const bool holds = compare(n.cmp, eval_node(*n.lhs, env), eval_node(*n.rhs, env));
                return eval_node(holds ? *n.then_branch : *n.else_branch, env);
            }
        },
        node.value);
}

// Precedence levels used by the renderer: sums < products < unary < primary.
constexpr int kPrecSum = 1;
constexpr int kPrecProduct = 2;
constexpr int kPrecUnary = 3;
constexpr int kPrecPrimary = 4;

int precedence(const Expr::Node& node) {
    if (const auto* c = std::get_if<Expr::Constant>(&node.value)) {
        return std::signbit(c->value) ? kPrecUnary : kPrecPrimary;
    }
    if (std::holds_alternative<Expr::Negate>(node.value)) return kPrecUnary;
    if (const auto* b = std::get_if<Expr::Binary>(&node.value)) {
        return (b->op == BinaryOp::kAdd || b->op == BinaryOp::kSub) ? kPrecSum : kPrecProduct;
    }
    return kPrecPrimary;
}

void render(const Expr::Node& node, std::string& out);

void render_wrapped(const Expr::Node& node, bool parens, std::string& out) {
    if (parens) out += '(';
    render(node, out);
    if (parens) out += ')';
}

void render(const Expr::Node& node, std::string& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expr::Constant>) {
                out += format_number(n.value);
            } else if constexpr (std::is_same_v<T, Expr::FeatureRef>) {
                out += n.name;
            } else if constexpr (std::is_same_v<T, Expr::Negate>) {
                out += '-';
                // A literal right after '-' would be folded into a negative constant on reparse.
                const bool literal = std::holds_alternative<Expr::Constant>(n.operand->value) &&
                                     !std::signbit(std::get<Expr::Constant>(n.operand->value).value);
                render_wrapped(*n.operand, literal || precedence(*n.operand) < kPrecUnary, out);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                const int prec = precedence(node);
                render_wrapped(*n.lhs, precedence(*n.lhs) < prec, out);
                out += ' ';
                out += to_string(n.op);
                out += ' ';
                render_wrapped(*n.rhs, precedence(*n.rhs) <= prec, out);
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                out += to_string(n.fn);
                out += '(';
                for (std::size_t i = 0; i < n.args.size(); ++i) {
                    if (i) out += ", ";
                    render(*n.args[i], out);
                }
                out += ')';
            } else {
                out += "cond(";
                render(*n.lhs, out);
                out += ' ';
                out += to_string(n.cmp);
                out += ' ';
                render(*n.rhs, out);
                out += ", ";
                render(*n.then_branch, out);
                out += ", ";
                render(*n.else_branch, out);
                out += ')';
            }
        },
        node.value);
}

void collect(const Expr::Node& node, std::set<std::string, std::less<>>& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expr::FeatureRef>) {
                out.insert(n.name);
            } else if constexpr (std::is_same_v<T, Expr::Negate>) {
                collect(*n.operand, out);
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                collect(*n.lhs, out);
                collect(*n.rhs, out);
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                for (const auto& a : n.args) collect(*a, out);
            } else if constexpr (std::is_same_v<T, Expr::Cond>) {
                collect(*n.lhs, out);
                collect(*n.rhs, out);
                collect(*n.then_branch, out);
                collect(*n.else_branch, out);
            }
        },
        node.value);
}

}  // namespace

namespace detail {

void throw_missing_feature(std::string_view name) {
    throw AuditError(ErrorCode::kMissingFeature, "missing feature '" + std::string(name) + "'");
}

std::string describe(SourceLoc loc) {
    if (!loc.known()) return "<unknown location>";
    return "line " + std::to_string(loc.line) + ", column " + std::to_string(loc.column);
}

}  // namespace detail

Expr::Expr() : node_(make(Constant{0.0}, {})) {}

Expr Expr::constant(double value, SourceLoc loc) { return Expr(make(Constant{value}, loc)); }

Expr Expr::feature(std::string name, SourceLoc loc) { return Expr(make(FeatureRef{std::move(name)}, loc)); }

Expr Expr::negate(const Expr& operand, SourceLoc loc) { return Expr(make(Negate{operand.node_}, loc)); }

Expr Expr::binary(BinaryOp op, const Expr& lhs, const Expr& rhs, SourceLoc loc) {
    return Expr(make(Binary{op, lhs.node_, rhs.node_}, loc));
}

Expr Expr::call(Function fn, const std::vector<Expr>& args, SourceLoc loc) {
    const std::size_t n = args.size();
    const bool arity_ok = (fn == Function::kAbs && n == 1) || (fn == Function::kClip && n == 3) ||
                          ((fn == Function::kMin || fn == Function::kMax) && n >= 2);
    if (!arity_ok) {
        throw AuditError(ErrorCode::kInvalidArgument,
                         "wrong number of arguments for " + std::string(to_string(fn)));
    }
    Call c{fn, {}};
    for (const auto& a : args) c.args.push_back(a.node_);
    return Expr(make(std::move(c), loc));
}

Expr Expr::cond(CompareOp cmp, const Expr& lhs, const Expr& rhs, const Expr& then_branch, const Expr& else_branch,
                SourceLoc loc) {
    return Expr(make(Cond{cmp, lhs.node_, rhs.node_, then_branch.node_, else_branch.node_}, loc));
}

bool operator==(const Expr& a, const Expr& b) { return ptr_equal(a.node_, b.node_); }

double eval_expr(const Expr& expr, const FeatureEnv& env) { return eval_node(*expr.root(), env); }

void collect_features(const Expr& expr, std::set<std::string, std::less<>>& out) { collect(*expr.root(), out); }

std::string render_expr(const Expr& expr) {
    std::string out;
    render(*expr.root(), out);
    return out;
}

std::string format_number(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) return "nan";
    return std::string(buf.data(), end);
}

double CompiledExpr::operator()(std::span<const double> values) const {
    if (program_.empty()) return 0.0;
    return run(root_, values);
}

double CompiledExpr::run(std::size_t index, std::span<const double> values) const {
    const Instr& in = program_[index];
    const auto arg = [&](std::size_t i) { return run(in.children[i], values); };
    switch (in.op) {
        case Op::kConst: return in.constant;
        case Op::kSlot: return values[in.slot];
        case Op::kNeg: return -arg(0);
        case Op::kAdd: return arg(0) + arg(1);
        case Op::kSub: return arg(0) - arg(1);
        case Op::kMul: return arg(0) * arg(1);
        case Op::kDiv: {
            const double a = arg(0);
            const double b = arg(1);
            if (b == 0.0) throw_div_zero(in.loc);
            return a / b;
        }
        case Op::kMin:
        case Op::kMax: {
            double acc = arg(0);
            for (std::size_t i = 1; i < in.children.size(); ++i) {
                const double v = arg(i);
                acc = in.op == Op::kMin ? std::min(acc, v) : std::max(acc, v);
            }
            return acc;
        }
        case Op::kAbs: return std::abs(arg(0));
        case Op::kClip: return clip(arg(0), arg(1), arg(2), in.loc);
        case Op::kCond: return compare(in.cmp, arg(0), arg(1)) ? arg(2) : arg(3);
    }
    return 0.0;
}

}  // namespace reward_audit
