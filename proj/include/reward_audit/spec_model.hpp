#pragma once

#include "reward_audit/expr.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace reward_audit {

enum class EventKind { kCollision, kGoal, kTimeout, kLaneDeparture, kRedLight, kWrongLane, kZeroSpeed };

enum class OutcomeTag {
    kProgress,
    kTime,
    kCollision,
    kLaw,
    kFuel,
    kWear,
    kPassengerExperience,
    kExternalImpact,
};

enum class AttributeKind { kOutcome, kShaping, kAmbiguous };

enum class DesignProvenance { kPrincipled, kTrialAndError, kUnstated };

/// Declared unit of a feature. Conversion happens during trajectory synthesis only.
enum class Unit { kMps, kKmh, kM, kKm, kS, kRad, kDeg, kCount, kRatio, kSteps, kScalar };

std::string_view to_string(EventKind kind);
std::string_view to_string(OutcomeTag tag);
std::string_view to_string(AttributeKind kind);
std::string_view to_string(DesignProvenance provenance);
std::string_view to_string(Unit unit);

std::optional<EventKind> parse_event_kind(std::string_view text);
std::optional<OutcomeTag> parse_outcome_tag(std::string_view text);
std::optional<AttributeKind> parse_attribute_kind(std::string_view text);
std::optional<DesignProvenance> parse_provenance(std::string_view text);
std::optional<Unit> parse_unit(std::string_view text);

const std::vector<EventKind>& all_event_kinds();
const std::vector<OutcomeTag>& all_outcome_tags();

/// `[a-z][a-z0-9_]*`
bool is_identifier(std::string_view text);

struct Accrual {
    enum class Mode { kPerRewardStep, kPerDecisionStep, kOnEvent };

    Mode mode = Mode::kPerRewardStep;
    EventKind event = EventKind::kCollision;  // meaningful for kOnEvent only

    static Accrual per_reward_step() { return {}; }
    static Accrual per_decision_step() { return {Mode::kPerDecisionStep, EventKind::kCollision}; }
    static Accrual on_event(EventKind kind) { return {Mode::kOnEvent, kind}; }

    friend bool operator==(const Accrual&, const Accrual&) = default;
};

struct AttributeDef {
    std::string id;
    double weight = 1.0;
    Expr expr;
    AttributeKind kind = AttributeKind::kOutcome;
    std::set<OutcomeTag> outcome_tags;
    Accrual accrual;

    friend bool operator==(const AttributeDef&, const AttributeDef&) = default;
};

struct TerminalRule {
    EventKind on = EventKind::kCollision;
    Expr expr;

    friend bool operator==(const TerminalRule&, const TerminalRule&) = default;
};

struct EpisodeConfig {
    std::optional<double> reward_step_s;
    std::optional<double> decision_step_s;  // defaults to reward_step_s
    std::optional<double> discount;
    bool episodic = true;
    std::optional<double> time_limit_s;
    /// Time limit expressed as "time to drive the path at this speed".
    std::optional<double> time_limit_at_kmh;
    std::set<EventKind> termination_criteria;

    double effective_decision_step() const { return decision_step_s.value_or(reward_step_s.value_or(0.0)); }

    /// Reward steps per decision step (>= 1). Requires reward_step_s.
    std::size_t decision_ratio() const;

    friend bool operator==(const EpisodeConfig&, const EpisodeConfig&) = default;
};

struct FeatureDecl {
    std::string name;
    Unit unit = Unit::kScalar;

    friend bool operator==(const FeatureDecl&, const FeatureDecl&) = default;
};

struct RewardSpec {
    std::string id;
    std::string source;
    int format_version = 1;
    std::vector<FeatureDecl> features;
    std::vector<AttributeDef> per_step_attributes;
    std::vector<TerminalRule> terminal_rules;
    EpisodeConfig episode;
    /// Absent when the document never states it.
    std::optional<DesignProvenance> design_provenance;
    std::set<std::string> declared_shaping_ids;

    const AttributeDef* find_attribute(std::string_view attribute_id) const;
    const FeatureDecl* find_feature(std::string_view name) const;
    const TerminalRule* find_terminal(EventKind kind) const;

    /// Structural equality; the feature schema compares as a set.
    friend bool operator==(const RewardSpec& a, const RewardSpec& b);
};

enum class Severity { kError, kWarning };

enum class FindingCode {
    kInvalidIdentifier,
    kDuplicateAttributeId,
    kDuplicateFeature,
    kUnknownFeature,
    kNonFiniteWeight,
    kNonFiniteConstant,
    kNonPositiveStep,
    kStepMisalignment,
    kInvalidDiscount,
    kInvalidTimeLimit,
    kContinuingWithTermination,
    kDuplicateTerminalRule,
    kMissingOutcomeTags,
    kOutcomeDeclaredAsShaping,
    kUnknownShapingDeclaration,
    kInvalidClipBounds,
    kUnsupportedFormatVersion,
    kInvalidScenarioValue,
};

std::string_view to_string(Severity severity);
std::string_view to_string(FindingCode code);

struct ValidationFinding {
    Severity severity;
    FindingCode code;
    std::string locator;
    std::string message;
};

/// Tolerance for step alignment checks, in seconds.
inline constexpr double kStepToleranceS = 1e-9;

/// Empty iff every structural invariant of `spec` holds.
std::vector<ValidationFinding> validate_spec(const RewardSpec& spec);

bool has_errors(const std::vector<ValidationFinding>& findings);

}  // namespace reward_audit
