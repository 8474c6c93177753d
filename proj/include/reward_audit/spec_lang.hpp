#pragma once

// Text formats for reward specs (.rspec) and scenarios (.scn).
//
//   doc       := header IDENT (KEY "=" VALUE | block)*
//   block     := NAME [IDENT] "{" (KEY "=" VALUE)* "}"
//   VALUE     := NUMBER | STRING | IDENT | "[" [item ("," item)*] "]" | expr
//   expr      := term (("+" | "-") term)*
//   term      := unary (("*" | "/") unary)*
//   unary     := "-" unary | primary
//   primary   := NUMBER | IDENT | IDENT "(" args ")" | "(" expr ")"
//
// `#` starts a comment that runs to end of line. Identifiers are [a-z][a-z0-9_]*.

#include "reward_audit/spec_model.hpp"
#include "reward_audit/trajectory.hpp"

#include <string>
#include <string_view>

namespace reward_audit {

/// Throws ParseError (kSyntaxError, kUnknownKey, kUnknownFeature) on malformed input.
RewardSpec parse_spec(std::string_view text);

/// Canonical form: keys sorted within blocks, attribute and terminal order preserved,
/// shortest round-trip numerals, LF line endings, empty sections omitted.
std::string render_spec(const RewardSpec& spec);

ScenarioSpec parse_scenario(std::string_view text);

std::string render_scenario(const ScenarioSpec& scenario);

/// Parses a standalone expression, e.g. for tests and the CLI.
Expr parse_expr(std::string_view text);

}  // namespace reward_audit
