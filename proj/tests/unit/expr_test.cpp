#include "reward_audit/expr.hpp"
#include "reward_audit/spec_lang.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace reward_audit {
namespace {

using testing::Gen;
using testing::kPropertyCases;

Expr random_expr(Gen& g, int depth) { return testing::random_expr(g, depth, {"a", "b", "c"}); }

TEST(ExprEval, CaiCollisionPenalty) {
    const Expr e = parse_expr("-1000 * (v * v + 0.5)");
    EXPECT_DOUBLE_EQ(eval_expr(e, {{"v", 2.0}}), -4500.0);
    EXPECT_DOUBLE_EQ(eval_expr(e, {{"v", 0.0}}), -500.0);
}

TEST(ExprEval, Functions) {
    const FeatureEnv env{{"x", -3.0}, {"y", 7.0}};
    EXPECT_EQ(eval_expr(parse_expr("abs(x)"), env), 3.0);
    EXPECT_EQ(eval_expr(parse_expr("min(x, y, 1)"), env), -3.0);
    EXPECT_EQ(eval_expr(parse_expr("max(x, y, 1)"), env), 7.0);
    EXPECT_EQ(eval_expr(parse_expr("clip(y, 0, 5)"), env), 5.0);
    EXPECT_EQ(eval_expr(parse_expr("clip(x, 0, 5)"), env), 0.0);
    EXPECT_EQ(eval_expr(parse_expr("cond(x < y, 1, 2)"), env), 1.0);
    EXPECT_EQ(eval_expr(parse_expr("cond(x >= y, 1, 2)"), env), 2.0);
    EXPECT_EQ(eval_expr(parse_expr("cond(x == -3, 10, 20)"), env), 10.0);
}

TEST(ExprEval, OnlyTakenBranchIsEvaluated) {
    // The else branch would divide by zero and reference a missing feature.
    const Expr e = parse_expr("cond(x > 0, x, missing / 0)");
    EXPECT_EQ(eval_expr(e, {{"x", 2.0}}), 2.0);
}

TEST(ExprEval, MissingFeature) {
    try {
        eval_expr(parse_expr("speed + 1"), {});
        FAIL() << "expected throw";
    } catch (const AuditError& e) {
        EXPECT_EQ(e.code(), ErrorCode::kMissingFeature);
    }
}

TEST(ExprEval, DivisionByZero) {
    try {
        eval_expr(parse_expr("1 / (x - x)"), {{"x", 4.0}});
        FAIL() << "expected throw";
    } catch (const AuditError& e) {
        EXPECT_EQ(e.code(), ErrorCode::kDivisionByZero);
    }
}

TEST(ExprEval, ClipWithCrossedRuntimeBounds) {
    try {
        eval_expr(parse_expr("clip(1, lo, hi)"), {{"lo", 2.0}, {"hi", 1.0}});
        FAIL() << "expected throw";
    } catch (const AuditError& e) {
        EXPECT_EQ(e.code(), ErrorCode::kInvalidClipBounds);
    }
}

TEST(ExprStructure, CollectFeatures) {
    std::set<std::string, std::less<>> names;
    collect_features(parse_expr("a * b + cond(c < 1, d, 2) - abs(a)"), names);
    EXPECT_EQ(names, (std::set<std::string, std::less<>>{"a", "b", "c", "d"}));
}

TEST(ExprStructure, ConstantClipVisitor) {
    int visits = 0;
    for_each_constant_clip(parse_expr("clip(x, 1, 2) + clip(y, lo, 3) + clip(z, -1, 0)"),
                           [&](double lo, double hi, SourceLoc) {
                               ++visits;
                               EXPECT_LE(lo, hi);
                           });
    EXPECT_EQ(visits, 2);
}

TEST(ExprStructure, EqualityIgnoresLocations) {
    EXPECT_EQ(parse_expr("a+b*2"), parse_expr("  a +  b * 2"));
    EXPECT_NE(parse_expr("a+b*2"), parse_expr("(a+b)*2"));
    EXPECT_EQ(Expr(), Expr::constant(0.0));
}

TEST(ExprRender, MinimalParentheses) {
    EXPECT_EQ(render_expr(parse_expr("(a + b) * c")), "(a + b) * c");
    EXPECT_EQ(render_expr(parse_expr("a + (b * c)")), "a + b * c");
    EXPECT_EQ(render_expr(parse_expr("a - (b - c)")), "a - (b - c)");
    EXPECT_EQ(render_expr(parse_expr("(a - b) - c")), "a - b - c");
    EXPECT_EQ(render_expr(parse_expr("-1000 * (v * v + 0.5)")), "-1000 * (v * v + 0.5)");
    EXPECT_EQ(render_expr(parse_expr("cond(x <= 1, 2, 3)")), "cond(x <= 1, 2, 3)");
}

TEST(ExprRender, NumbersRoundTrip) {
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(-0.00002), "-2e-05");
    EXPECT_EQ(format_number(1000), "1000");
    const double tricky = 0.1 + 0.2;
    EXPECT_EQ(parse_expr(format_number(tricky)), Expr::constant(tricky));
}

TEST(ExprProperty, RenderParseRoundTrip) {
    Gen g(11);
    for (int i = 0; i < kPropertyCases; ++i) {
        const Expr e = random_expr(g, 5);
        const std::string text = render_expr(e);
        const Expr back = parse_expr(text);
        ASSERT_EQ(back, e) << text;
        ASSERT_EQ(render_expr(back), text);
        const FeatureEnv env{{"a", g.uniform(-5, 5)}, {"b", g.uniform(-5, 5)}, {"c", g.uniform(-5, 5)}};
        ASSERT_EQ(eval_expr(back, env), eval_expr(e, env)) << text;
    }
}

TEST(ExprProperty, CompiledMatchesTreeWalk) {
    Gen g(12);
    const std::vector<std::string> slots{"a", "b", "c"};
    const auto slot_of = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < slots.size(); ++i)
            if (slots[i] == name) return i;
        return std::nullopt;
    };
    for (int i = 0; i < kPropertyCases; ++i) {
        const Expr e = random_expr(g, 5);
        const CompiledExpr compiled = CompiledExpr::compile(e, slot_of);
        const std::vector<double> values{g.uniform(-5, 5), g.uniform(-5, 5), g.uniform(-5, 5)};
        const FeatureEnv env{{"a", values[0]}, {"b", values[1]}, {"c", values[2]}};
        ASSERT_EQ(compiled(values), eval_expr(e, env)) << render_expr(e);
    }
}

TEST(ExprCompiled, UnresolvedFeature) {
    const auto none = [](std::string_view) -> std::optional<std::size_t> { return std::nullopt; };
    try {
        CompiledExpr::compile(parse_expr("x + 1"), none);
        FAIL() << "expected throw";
    } catch (const AuditError& e) {
        EXPECT_EQ(e.code(), ErrorCode::kMissingFeature);
    }
}

}  // namespace
}  // namespace reward_audit
