#pragma once

#include "reward_audit/errors.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace reward_audit {

enum class BinaryOp { kAdd, kSub, kMul, kDiv };
enum class CompareOp { kLess, kLessEqual, kEqual, kGreaterEqual, kGreater };
enum class Function { kMin, kMax, kAbs, kClip };

std::string_view to_string(BinaryOp op);
std::string_view to_string(CompareOp op);
std::string_view to_string(Function fn);

/// Immutable arithmetic expression over named trajectory features.
///
/// Nodes are shared, so copies are cheap. Equality is structural and ignores
/// source locations.
class Expr {
  public:
    struct Node;

    struct Constant {
        double value;
    };
    struct FeatureRef {
        std::string name;
    };
    struct Negate {
        std::shared_ptr<const Node> operand;
    };
    struct Binary {
        BinaryOp op;
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };
    struct Call {
        Function fn;
        std::vector<std::shared_ptr<const Node>> args;
    };
    struct Cond {
        CompareOp cmp;
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
        std::shared_ptr<const Node> then_branch;
        std::shared_ptr<const Node> else_branch;
    };

    using Variant = std::variant<Constant, FeatureRef, Negate, Binary, Call, Cond>;

    struct Node {
        Variant value;
        SourceLoc loc;
    };

    Expr();  // constant 0

    static Expr constant(double value, SourceLoc loc = {});
    static Expr feature(std::string name, SourceLoc loc = {});
    static Expr negate(const Expr& operand, SourceLoc loc = {});
    static Expr binary(BinaryOp op, const Expr& lhs, const Expr& rhs, SourceLoc loc = {});
    static Expr call(Function fn, const std::vector<Expr>& args, SourceLoc loc = {});
    static Expr cond(CompareOp cmp, const Expr& lhs, const Expr& rhs, const Expr& then_branch,
                     const Expr& else_branch, SourceLoc loc = {});

    const Variant& node() const noexcept { return node_->value; }
    SourceLoc location() const noexcept { return node_->loc; }
    const std::shared_ptr<const Node>& root() const noexcept { return node_; }

    static Expr wrap(std::shared_ptr<const Node> node) { return Expr(std::move(node)); }

    friend bool operator==(const Expr& a, const Expr& b);

  private:
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    std::shared_ptr<const Node> node_;
};

inline Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::kAdd, a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::kSub, a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::kMul, a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(BinaryOp::kDiv, a, b); }
inline Expr operator-(const Expr& a) { return Expr::negate(a); }

using FeatureEnv = std::map<std::string, double, std::less<>>;

/// Tree-walking evaluation. Only the taken branch of a `cond` is evaluated.
/// Throws AuditError with kMissingFeature, kDivisionByZero or kInvalidClipBounds.
double eval_expr(const Expr& expr, const FeatureEnv& env);

void collect_features(const Expr& expr, std::set<std::string, std::less<>>& out);

/// Calls `visit(lo, hi, loc)` for every clip whose bounds are both literal constants.
template <class Visitor>
void for_each_constant_clip(const Expr& expr, Visitor&& visit);

/// Canonical text form with minimal parentheses; parses back to an equal Expr.
std::string render_expr(const Expr& expr);

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

/// An expression with feature names resolved to slot indices.
class CompiledExpr {
  public:
    CompiledExpr() = default;

    /// `slot_of` maps a feature name to its index; names it cannot resolve raise kMissingFeature.
    template <class SlotLookup>
    static CompiledExpr compile(const Expr& expr, SlotLookup&& slot_of);

    double operator()(std::span<const double> values) const;

  private:
    enum class Op : unsigned char { kConst, kSlot, kNeg, kAdd, kSub, kMul, kDiv, kMin, kMax, kAbs, kClip, kCond };

    struct Instr {
        Op op;
        CompareOp cmp = CompareOp::kLess;
        double constant = 0.0;
        std::size_t slot = 0;
        std::vector<std::size_t> children;
        SourceLoc loc;
    };

    template <class SlotLookup>
    std::size_t emit(const Expr::Node& node, SlotLookup& slot_of);

    double run(std::size_t index, std::span<const double> values) const;

    std::vector<Instr> program_;
    std::size_t root_ = 0;
};

namespace detail {
[[noreturn]] void throw_missing_feature(std::string_view name);
std::string describe(SourceLoc loc);
}  // namespace detail

template <class Visitor>
void for_each_constant_clip(const Expr& expr, Visitor&& visit) {
    const auto walk = [&](const auto& self, const Expr::Node& node) -> void {
        std::visit(
            [&](const auto& n) {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Expr::Negate>) {
                    self(self, *n.operand);
                } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                    self(self, *n.lhs);
                    self(self, *n.rhs);
                } else if constexpr (std::is_same_v<T, Expr::Call>) {
                    for (const auto& a : n.args) self(self, *a);
                    if (n.fn == Function::kClip && n.args.size() == 3) {
                        const auto* lo = std::get_if<Expr::Constant>(&n.args[1]->value);
                        const auto* hi = std::get_if<Expr::Constant>(&n.args[2]->value);
                        if (lo && hi) visit(lo->value, hi->value, node.loc);
                    }
                } else if constexpr (std::is_same_v<T, Expr::Cond>) {
                    self(self, *n.lhs);
                    self(self, *n.rhs);
                    self(self, *n.then_branch);
                    self(self, *n.else_branch);
                }
            },
            node.value);
    };
    walk(walk, *expr.root());
}

template <class SlotLookup>
CompiledExpr CompiledExpr::compile(const Expr& expr, SlotLookup&& slot_of) {
    CompiledExpr out;
    out.root_ = out.emit(*expr.root(), slot_of);
    return out;
}

template <class SlotLookup>
std::size_t CompiledExpr::emit(const Expr::Node& node, SlotLookup& slot_of) {
    Instr instr{};
    instr.loc = node.loc;
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Expr::Constant>) {
                instr.op = Op::kConst;
                instr.constant = n.value;
            } else if constexpr (std::is_same_v<T, Expr::FeatureRef>) {
                auto slot = slot_of(std::string_view(n.name));
                if (!slot) detail::throw_missing_feature(n.name);
                instr.op = Op::kSlot;
                instr.slot = *slot;
            } else if constexpr (std::is_same_v<T, Expr::Negate>) {
                instr.op = Op::kNeg;
                instr.children.push_back(emit(*n.operand, slot_of));
            } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                switch (n.op) {
                    case BinaryOp::kAdd: instr.op = Op::kAdd; break;
                    case BinaryOp::kSub: instr.op = Op::kSub; break;
                    case BinaryOp::kMul: instr.op = Op::kMul; break;
                    case BinaryOp::kDiv: instr.op = Op::kDiv; break;
                }
                instr.children.push_back(emit(*n.lhs, slot_of));
                instr.children.push_back(emit(*n.rhs, slot_of));
            } else if constexpr (std::is_same_v<T, Expr::Call>) {
                switch (n.fn) {
                    case Function::kMin: instr.op = Op::kMin; break;
                    case Function::kMax: instr.op = Op::kMax; break;
                    case Function::kAbs: instr.op = Op::kAbs; break;
                    case Function::kClip: instr.op = Op::kClip; break;
                }
                for (const auto& a : n.args) instr.children.push_back(emit(*a, slot_of));
            } else {
                instr.op = Op::kCond;
                instr.cmp = n.cmp;
                instr.children.push_back(emit(*n.lhs, slot_of));
                instr.children.push_back(emit(*n.rhs, slot_of));
                instr.children.push_back(emit(*n.then_branch, slot_of));
                instr.children.push_back(emit(*n.else_branch, slot_of));
            }
        },
        node.value);
    program_.push_back(std::move(instr));
    return program_.size() - 1;
}

}  // namespace reward_audit
