#pragma once

#include "reward_audit/evaluator.hpp"
#include "reward_audit/spec_model.hpp"
#include "reward_audit/trajectory.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace reward_audit {

enum class CheckId {
    kUnsafeShaping = 1,
    kPreferenceMismatch = 2,
    kRiskTolerance = 3,
    kLearnableLoophole = 4,
    kMissingAttributes = 5,
    kRedundantAttributes = 6,
    kTrialAndError = 7,
    kIncompleteSpecification = 8,
};

enum class CheckStatus { kPass, kFail, kWarning, kNotEvaluable };

std::string_view to_string(CheckId id);
/// Short title of a check, e.g. "Undesired risk tolerance via indifference points".
std::string_view check_title(CheckId id);
std::string_view to_string(CheckStatus status);
const std::vector<CheckId>& all_check_ids();

/// Only checks 1-4 can fail; the others report warnings at most.
constexpr bool can_fail(CheckId id) { return static_cast<int>(id) <= 4; }

struct CheckResult {
    CheckId check_id;
    CheckStatus status;
    nlohmann::json details;
    std::string message;
};

/// Comparison tolerance: 1e-9 absolute plus 1e-9 relative to the larger magnitude.
double tolerance(double a, double b);
/// a < b by more than tolerance(a, b).
bool strictly_less(double a, double b);

/// Pass iff gA < gB strictly (a tie fails).
CheckResult preference_check(double g_a, double g_b);

/// p = (gB - gA) / (gC - gA). Throws kOrderingViolated unless gA < gB < gC.
double indifference_point(double g_a, double g_b, double g_c);

/// (p / (1 - p) + 0.5) * path length; +infinity at p = 1. Throws kInvalidArgument outside [0, 1] or for L <= 0.
double km_per_collision(double p, double path_length_km);

struct RiskBaseline {
    std::string label;
    double km_per_collision = 0.0;
    std::string provenance;
};

/// Shipped human reference points (drunk and sober 16-17 year olds).
std::vector<RiskBaseline> default_baselines();

/// `overrides` replace or add baselines by label.
std::vector<RiskBaseline> merge_baselines(std::vector<RiskBaseline> base, const std::map<std::string, double>& overrides);

/// Throws kInvalidArgument when `label` is not configured.
const RiskBaseline& find_baseline(const std::vector<RiskBaseline>& baselines, std::string_view label);

inline constexpr std::string_view kDefaultBaselineLabel = "drunk_teen_16_17";

/// Pass iff km >= baseline (inclusive). An infinite km is not evaluable.
CheckResult risk_tolerance_check(double km, const RiskBaseline& baseline);

/// Fails when an attribute of kind shaping is not declared as shaping; warns on ambiguous ones.
CheckResult shaping_lint(const RewardSpec& spec);

struct ShapingSample {
    std::size_t state = 0;
    std::size_t next_state = 0;
    double value = 0.0;
};

/// True iff every sample satisfies |F - (gamma * phi(s') - phi(s))| <= tol. Throws kMissingPotential.
bool potential_shaping_verify(const std::vector<ShapingSample>& samples, const Potential& phi, double gamma,
                              double tol);

/// Outcome tags a terminal rule on `kind` covers implicitly.
std::set<OutcomeTag> implied_tags(EventKind kind);

CheckResult attribute_coverage_lint(const RewardSpec& spec, const std::set<OutcomeTag>& required);
CheckResult redundancy_lint(const RewardSpec& spec);
CheckResult trial_and_error_lint(const RewardSpec& spec);
CheckResult completeness_lint(const RewardSpec& spec);

/// Fail iff G(undesirable) > G(clean) strictly.
CheckResult loophole_check(const RewardSpec& spec, const Trajectory& undesirable, const Trajectory& clean);

/// Checks 1 and 5-8.
std::vector<CheckResult> lint_spec(const RewardSpec& spec, const std::set<OutcomeTag>& required);

/// Returns of the three canonical drives plus the checks derived from them.
struct CanonicalAudit {
    std::optional<ReturnBreakdown> crash;
    std::optional<ReturnBreakdown> idle;
    std::optional<ReturnBreakdown> succ;
    std::string not_evaluable_reason;
    std::optional<double> p;
    std::optional<double> km_per_collision;
    CheckResult preference;
    CheckResult risk;
    CheckResult loophole;

    bool evaluable() const { return crash && idle && succ; }
};

/// Synthesizes crash/idle/succ and runs checks 2-4. Never throws kNotEvaluable; such
/// cases come back as not_evaluable results.
CanonicalAudit audit_canonical(const RewardSpec& spec, const ScenarioSpec& scenario, const RiskBaseline& baseline);

}  // namespace reward_audit
