#include "reward_audit/spec_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace reward_audit {

namespace {

template <class E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<EventKind, 7> kEventNames{{
    {EventKind::kCollision, "collision"},
    {EventKind::kGoal, "goal"},
    {EventKind::kTimeout, "timeout"},
    {EventKind::kLaneDeparture, "lane_departure"},
    {EventKind::kRedLight, "red_light"},
    {EventKind::kWrongLane, "wrong_lane"},
    {EventKind::kZeroSpeed, "zero_speed"},
}};

constexpr NameTable<OutcomeTag, 8> kTagNames{{
    {OutcomeTag::kProgress, "progress"},
    {OutcomeTag::kTime, "time"},
    {OutcomeTag::kCollision, "collision"},
    {OutcomeTag::kLaw, "law"},
    {OutcomeTag::kFuel, "fuel"},
    {OutcomeTag::kWear, "wear"},
    {OutcomeTag::kPassengerExperience, "passenger_experience"},
    {OutcomeTag::kExternalImpact, "external_impact"},
}};

constexpr NameTable<AttributeKind, 3> kKindNames{{
    {AttributeKind::kOutcome, "outcome"},
    {AttributeKind::kShaping, "shaping"},
    {AttributeKind::kAmbiguous, "ambiguous"},
}};

constexpr NameTable<DesignProvenance, 3> kProvenanceNames{{
    {DesignProvenance::kPrincipled, "principled"},
    {DesignProvenance::kTrialAndError, "trial_and_error"},
    {DesignProvenance::kUnstated, "unstated"},
}};

constexpr NameTable<Unit, 11> kUnitNames{{
    {Unit::kMps, "mps"},
    {Unit::kKmh, "kmh"},
    {Unit::kM, "m"},
    {Unit::kKm, "km"},
    {Unit::kS, "s"},
    {Unit::kRad, "rad"},
    {Unit::kDeg, "deg"},
    {Unit::kCount, "count"},
    {Unit::kRatio, "ratio"},
    {Unit::kSteps, "steps"},
    {Unit::kScalar, "scalar"},
}};

template <class E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E value) {
    for (const auto& [e, name] : table)
        if (e == value) return name;
    return "?";
}

template <class E, std::size_t N>
std::optional<E> value_of(const NameTable<E, N>& table, std::string_view text) {
    for (const auto& [e, name] : table)
        if (name == text) return e;
    return std::nullopt;
}

}  // namespace

std::string_view to_string(EventKind kind) { return name_of(kEventNames, kind); }
std::string_view to_string(OutcomeTag tag) { return name_of(kTagNames, tag); }
std::string_view to_string(AttributeKind kind) { return name_of(kKindNames, kind); }
std::string_view to_string(DesignProvenance provenance) { return name_of(kProvenanceNames, provenance); }
std::string_view to_string(Unit unit) { return name_of(kUnitNames, unit); }

std::optional<EventKind> parse_event_kind(std::string_view text) { return value_of(kEventNames, text); }
std::optional<OutcomeTag> parse_outcome_tag(std::string_view text) { return value_of(kTagNames, text); }
std::optional<AttributeKind> parse_attribute_kind(std::string_view text) { return value_of(kKindNames, text); }
std::optional<DesignProvenance> parse_provenance(std::string_view text) { return value_of(kProvenanceNames, text); }
std::optional<Unit> parse_unit(std::string_view text) { return value_of(kUnitNames, text); }

const std::vector<EventKind>& all_event_kinds() {
    static const std::vector<EventKind> kinds = [] {
        std::vector<EventKind> out;
        for (const auto& [e, name] : kEventNames) out.push_back(e);
        return out;
    }();
    return kinds;
}

const std::vector<OutcomeTag>& all_outcome_tags() {
    static const std::vector<OutcomeTag> tags = [] {
        std::vector<OutcomeTag> out;
        for (const auto& [e, name] : kTagNames) out.push_back(e);
        return out;
    }();
    return tags;
}

bool is_identifier(std::string_view text) {
    if (text.empty() || text[0] < 'a' || text[0] > 'z') return false;
    return std::all_of(text.begin(), text.end(),
                       [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; });
}

std::size_t EpisodeConfig::decision_ratio() const {
    const double reward = reward_step_s.value_or(0.0);
    if (!(reward > 0.0)) return 1;
    const double ratio = effective_decision_step() / reward;
    return static_cast<std::size_t>(std::max(1.0, std::round(ratio)));
}

const AttributeDef* RewardSpec::find_attribute(std::string_view attribute_id) const {
    for (const auto& a : per_step_attributes)
        if (a.id == attribute_id) return &a;
    return nullptr;
}

const FeatureDecl* RewardSpec::find_feature(std::string_view name) const {
    for (const auto& f : features)
        if (f.name == name) return &f;
    return nullptr;
}

const TerminalRule* RewardSpec::find_terminal(EventKind kind) const {
    for (const auto& t : terminal_rules)
        if (t.on == kind) return &t;
    return nullptr;
}

bool operator==(const RewardSpec& a, const RewardSpec& b) {
    const auto sorted = [](std::vector<FeatureDecl> f) {
        std::stable_sort(f.begin(), f.end(), [](const auto& x, const auto& y) { return x.name < y.name; });
        return f;
    };
    return a.id == b.id && a.source == b.source && a.format_version == b.format_version &&
           a.per_step_attributes == b.per_step_attributes && a.terminal_rules == b.terminal_rules &&
           a.episode == b.episode && a.design_provenance == b.design_provenance &&
           a.declared_shaping_ids == b.declared_shaping_ids && sorted(a.features) == sorted(b.features);
}

std::string_view to_string(Severity severity) { return severity == Severity::kError ? "error" : "warning"; }

std::string_view to_string(FindingCode code) {
    switch (code) {
        case FindingCode::kInvalidIdentifier: return "InvalidIdentifier";
        case FindingCode::kDuplicateAttributeId: return "DuplicateAttributeId";
        case FindingCode::kDuplicateFeature: return "DuplicateFeature";
        case FindingCode::kUnknownFeature: return "UnknownFeature";
        case FindingCode::kNonFiniteWeight: return "NonFiniteWeight";
        case FindingCode::kNonFiniteConstant: return "NonFiniteConstant";
        case FindingCode::kNonPositiveStep: return "NonPositiveStep";
        case FindingCode::kStepMisalignment: return "StepMisalignment";
        case FindingCode::kInvalidDiscount: return "InvalidDiscount";
        case FindingCode::kInvalidTimeLimit: return "InvalidTimeLimit";
        case FindingCode::kContinuingWithTermination: return "ContinuingWithTermination";
        case FindingCode::kDuplicateTerminalRule: return "DuplicateTerminalRule";
        case FindingCode::kMissingOutcomeTags: return "MissingOutcomeTags";
        case FindingCode::kOutcomeDeclaredAsShaping: return "OutcomeDeclaredAsShaping";
        case FindingCode::kUnknownShapingDeclaration: return "UnknownShapingDeclaration";
        case FindingCode::kInvalidClipBounds: return "InvalidClipBounds";
        case FindingCode::kUnsupportedFormatVersion: return "UnsupportedFormatVersion";
        case FindingCode::kInvalidScenarioValue: return "InvalidScenarioValue";
    }
    return "?";
}

namespace {

bool has_non_finite_constant(const Expr& expr) {
    const auto walk = [](const auto& self, const Expr::Node& node) -> bool {
        return std::visit(
            [&](const auto& n) -> bool {
                using T = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<T, Expr::Constant>) {
                    return !std::isfinite(n.value);
                } else if constexpr (std::is_same_v<T, Expr::FeatureRef>) {
                    return false;
                } else if constexpr (std::is_same_v<T, Expr::Negate>) {
                    return self(self, *n.operand);
                } else if constexpr (std::is_same_v<T, Expr::Binary>) {
                    return self(self, *n.lhs) || self(self, *n.rhs);
                } else if constexpr (std::is_same_v<T, Expr::Call>) {
                    return std::any_of(n.args.begin(), n.args.end(), [&](const auto& a) { return self(self, *a); });
                } else {
                    return self(self, *n.lhs) || self(self, *n.rhs) || self(self, *n.then_branch) ||
                           self(self, *n.else_branch);
                }
            },
            node.value);
    };
    return walk(walk, *expr.root());
}

class FindingSink {
  public:
    void error(FindingCode code, std::string locator, std::string message) {
        out_.push_back({Severity::kError, code, std::move(locator), std::move(message)});
    }
    void warning(FindingCode code, std::string locator, std::string message) {
        out_.push_back({Severity::kWarning, code, std::move(locator), std::move(message)});
    }
    std::vector<ValidationFinding> take() { return std::move(out_); }

  private:
    std::vector<ValidationFinding> out_;
};

void check_expr(const RewardSpec& spec, const Expr& expr, const std::string& locator, FindingSink& sink) {
    std::set<std::string, std::less<>> names;
    collect_features(expr, names);
    for (const auto& name : names) {
        if (!spec.find_feature(name)) {
            sink.error(FindingCode::kUnknownFeature, locator, "feature '" + name + "' is not declared");
        }
    }
    if (has_non_finite_constant(expr)) {
        sink.error(FindingCode::kNonFiniteConstant, locator, "expression contains a non-finite constant");
    }
    for_each_constant_clip(expr, [&](double lo, double hi, SourceLoc) {
        if (lo > hi) {
            sink.error(FindingCode::kInvalidClipBounds, locator,
                       "clip bounds require lo <= hi (" + format_number(lo) + " > " + format_number(hi) + ")");
        }
    });
}

void check_episode(const EpisodeConfig& ep, FindingSink& sink) {
    const auto positive = [](const std::optional<double>& v) { return !v || (std::isfinite(*v) && *v > 0.0); };
    if (!positive(ep.reward_step_s)) {
        sink.error(FindingCode::kNonPositiveStep, "episode.reward_step_s", "reward step must be > 0 seconds");
    }
    if (!positive(ep.decision_step_s)) {
        sink.error(FindingCode::kNonPositiveStep, "episode.decision_step_s", "decision step must be > 0 seconds");
    }
    if (ep.reward_step_s && ep.decision_step_s && *ep.reward_step_s > 0 && *ep.decision_step_s > 0) {
        const double reward = *ep.reward_step_s;
        const double decision = *ep.decision_step_s;
        const double ratio = std::round(decision / reward);
        if (decision + kStepToleranceS < reward || std::abs(decision - ratio * reward) > kStepToleranceS) {
            sink.error(FindingCode::kStepMisalignment, "episode.decision_step_s",
                       "decision step " + format_number(decision) + " s is not an integer multiple of reward step " +
                           format_number(reward) + " s");
        }
    }
    if (ep.discount && !(*ep.discount > 0.0 && *ep.discount <= 1.0)) {
        sink.error(FindingCode::kInvalidDiscount, "episode.discount", "discount must lie in (0, 1]");
    }
    if (!positive(ep.time_limit_s)) {
        sink.error(FindingCode::kInvalidTimeLimit, "episode.time_limit_s", "time limit must be > 0 seconds");
    }
    if (!positive(ep.time_limit_at_kmh)) {
        sink.error(FindingCode::kInvalidTimeLimit, "episode.time_limit_at_kmh", "time-limit speed must be > 0");
    }
    if (!ep.episodic && !ep.termination_criteria.empty()) {
        sink.error(FindingCode::kContinuingWithTermination, "episode.termination",
                   "a continuing task cannot declare termination criteria");
    }
}

}  // namespace

std::vector<ValidationFinding> validate_spec(const RewardSpec& spec) {
    FindingSink sink;

    if (spec.format_version != 1) {
        sink.error(FindingCode::kUnsupportedFormatVersion, "format_version", "only format_version = 1 is supported");
    }
    if (!is_identifier(spec.id)) {
        sink.error(FindingCode::kInvalidIdentifier, "reward_spec", "spec id '" + spec.id + "' is not an identifier");
    }

    std::set<std::string> seen_features;
    for (const auto& f : spec.features) {
        const std::string loc = "features." + f.name;
        if (!is_identifier(f.name)) {
            sink.error(FindingCode::kInvalidIdentifier, loc, "feature name '" + f.name + "' is not an identifier");
        }
        if (!seen_features.insert(f.name).second) {
            sink.error(FindingCode::kDuplicateFeature, loc, "feature '" + f.name + "' declared twice");
        }
    }

    std::set<std::string> seen_attributes;
    for (const auto& a : spec.per_step_attributes) {
        const std::string loc = "attribute " + a.id;
        if (!is_identifier(a.id)) {
            sink.error(FindingCode::kInvalidIdentifier, loc, "attribute id '" + a.id + "' is not an identifier");
        }
        if (!seen_attributes.insert(a.id).second) {
            sink.error(FindingCode::kDuplicateAttributeId, loc, "attribute id '" + a.id + "' is not unique");
        }
        if (!std::isfinite(a.weight)) {
            sink.error(FindingCode::kNonFiniteWeight, loc, "weight must be a finite real");
        }
        check_expr(spec, a.expr, loc, sink);
        if (a.kind == AttributeKind::kOutcome) {
            if (a.outcome_tags.empty()) {
                sink.error(FindingCode::kMissingOutcomeTags, loc, "outcome attributes need at least one outcome tag");
            }
            if (spec.declared_shaping_ids.count(a.id)) {
                sink.error(FindingCode::kOutcomeDeclaredAsShaping, loc,
                           "outcome attribute '" + a.id + "' is listed as declared shaping");
            }
        }
    }

    std::set<EventKind> seen_terminals;
    for (const auto& t : spec.terminal_rules) {
        const std::string loc = "terminal " + std::string(to_string(t.on));
        if (!seen_terminals.insert(t.on).second) {
            sink.error(FindingCode::kDuplicateTerminalRule, loc, "more than one rule for this terminal event");
        }
        check_expr(spec, t.expr, loc, sink);
    }

    for (const auto& id : spec.declared_shaping_ids) {
        if (!spec.find_attribute(id)) {
            sink.warning(FindingCode::kUnknownShapingDeclaration, "declared_shaping",
                         "declared shaping id '" + id + "' names no attribute");
        }
    }

    check_episode(spec.episode, sink);
    return sink.take();
}

bool has_errors(const std::vector<ValidationFinding>& findings) {
    return std::any_of(findings.begin(), findings.end(),
                       [](const ValidationFinding& f) { return f.severity == Severity::kError; });
}

}  // namespace reward_audit
