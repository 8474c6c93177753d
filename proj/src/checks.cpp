#include "reward_audit/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace reward_audit {

using nlohmann::json;

std::string_view to_string(CheckId id) {
    switch (id) {
        case CheckId::kUnsafeShaping: return "unsafe_shaping";
        case CheckId::kPreferenceMismatch: return "preference_mismatch";
        case CheckId::kRiskTolerance: return "risk_tolerance";
        case CheckId::kLearnableLoophole: return "learnable_loophole";
        case CheckId::kMissingAttributes: return "missing_attributes";
        case CheckId::kRedundantAttributes: return "redundant_attributes";
        case CheckId::kTrialAndError: return "trial_and_error";
        case CheckId::kIncompleteSpecification: return "incomplete_specification";
    }
    return "?";
}

std::string_view check_title(CheckId id) {
    switch (id) {
        case CheckId::kUnsafeShaping: return "Unsafe reward shaping";
        case CheckId::kPreferenceMismatch: return "Mismatch in people's and reward function's preference orderings";
        case CheckId::kRiskTolerance: return "Undesired risk tolerance via indifference points";
        case CheckId::kLearnableLoophole: return "Learnable loophole(s)";
        case CheckId::kMissingAttributes: return "Missing attribute(s)";
        case CheckId::kRedundantAttributes: return "Redundant attribute(s)";
        case CheckId::kTrialAndError: return "Trial-and-error reward design";
        case CheckId::kIncompleteSpecification: return "Incomplete description of problem specification";
    }
    return "?";
}

std::string_view to_string(CheckStatus status) {
    switch (status) {
        case CheckStatus::kPass: return "pass";
        case CheckStatus::kFail: return "fail";
        case CheckStatus::kWarning: return "warning";
        case CheckStatus::kNotEvaluable: return "not_evaluable";
    }
    return "?";
}

const std::vector<CheckId>& all_check_ids() {
    static const std::vector<CheckId> ids{
        CheckId::kUnsafeShaping,       CheckId::kPreferenceMismatch, CheckId::kRiskTolerance,
        CheckId::kLearnableLoophole,   CheckId::kMissingAttributes,  CheckId::kRedundantAttributes,
        CheckId::kTrialAndError,       CheckId::kIncompleteSpecification,
    };
    return ids;
}

double tolerance(double a, double b) { return 1e-9 + 1e-9 * std::max(std::abs(a), std::abs(b)); }

bool strictly_less(double a, double b) { return a < b - tolerance(a, b); }

namespace {

CheckResult result(CheckId id, CheckStatus status, json details, std::string message) {
    return {id, status, std::move(details), std::move(message)};
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i];
    }
    return out;
}

}  // namespace

CheckResult preference_check(double g_a, double g_b) {
    const double margin = g_b - g_a;
    json details{{"g_a", g_a}, {"g_b", g_b}, {"margin", margin}};
    if (strictly_less(g_a, g_b)) {
        return result(CheckId::kPreferenceMismatch, CheckStatus::kPass, details,
                      "crash is less preferred than idle (margin " + format_number(margin) + ")");
    }
    return result(CheckId::kPreferenceMismatch, CheckStatus::kFail, details,
                  "crash is not less preferred than idle (margin " + format_number(margin) + ")");
}

double indifference_point(double g_a, double g_b, double g_c) {
    if (!strictly_less(g_a, g_b)) {
        throw AuditError(ErrorCode::kOrderingViolated, "indifference point needs gA < gB (crash < idle)");
    }
    if (!strictly_less(g_b, g_c)) {
        throw AuditError(ErrorCode::kOrderingViolated, "indifference point needs gB < gC (idle < succ)");
    }
    return (g_b - g_a) / (g_c - g_a);
}

double km_per_collision(double p, double path_length_km) {
    if (!(p >= 0.0 && p <= 1.0)) throw AuditError(ErrorCode::kInvalidArgument, "p must lie in [0, 1]");
    if (!(path_length_km > 0.0) || !std::isfinite(path_length_km)) {
        throw AuditError(ErrorCode::kInvalidArgument, "path length must be > 0");
    }
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return (p / (1.0 - p) + 0.5) * path_length_km;
}

std::vector<RiskBaseline> default_baselines() {
    constexpr double kDrunkTeen = 1.02 * 2000.0;
    return {
        {"drunk_teen_16_17", kDrunkTeen, "derived: 2000 x the 1.02 km per collision of the cai19 reward function"},
        {"sober_teen_16_17", kDrunkTeen * 37.0, "derived: drunk 16-17 year old baseline x 37"},
    };
}

std::vector<RiskBaseline> merge_baselines(std::vector<RiskBaseline> base, const std::map<std::string, double>& overrides) {
    for (const auto& [label, km] : overrides) {
        if (!(km > 0.0) || !std::isfinite(km)) {
            throw AuditError(ErrorCode::kInvalidArgument, "baseline '" + label + "' must be finite and > 0");
        }
        auto it = std::find_if(base.begin(), base.end(), [&](const RiskBaseline& b) { return b.label == label; });
        if (it != base.end()) {
            it->km_per_collision = km;
            it->provenance = "configured";
        } else {
            base.push_back({label, km, "configured"});
        }
    }
    return base;
}

const RiskBaseline& find_baseline(const std::vector<RiskBaseline>& baselines, std::string_view label) {
    for (const auto& b : baselines)
        if (b.label == label) return b;
    throw AuditError(ErrorCode::kInvalidArgument,
                     "baseline '" + std::string(label) + "' is not configured; add it to a baselines block");
}

CheckResult risk_tolerance_check(double km, const RiskBaseline& baseline) {
    json details{{"baseline", baseline.label}, {"baseline_km_per_collision", baseline.km_per_collision}};
    if (std::isinf(km)) {
        details["km_per_collision"] = nullptr;
        return result(CheckId::kRiskTolerance, CheckStatus::kNotEvaluable, details,
                      "km per collision is unbounded (p = 1)");
    }
    const double ratio = km / baseline.km_per_collision;
    details["km_per_collision"] = km;
    details["ratio"] = ratio;
    const bool pass = km >= baseline.km_per_collision - tolerance(km, baseline.km_per_collision);
    return result(CheckId::kRiskTolerance, pass ? CheckStatus::kPass : CheckStatus::kFail, details,
                  format_number(km) + " km per collision vs " + baseline.label + " " +
                      format_number(baseline.km_per_collision) + " (ratio " + format_number(ratio) + ")");
}

CheckResult shaping_lint(const RewardSpec& spec) {
    std::vector<std::string> undeclared;
    std::vector<std::string> ambiguous;
    for (const auto& a : spec.per_step_attributes) {
        if (a.kind == AttributeKind::kShaping && !spec.declared_shaping_ids.count(a.id)) undeclared.push_back(a.id);
        if (a.kind == AttributeKind::kAmbiguous) ambiguous.push_back(a.id);
    }
    json details{{"undeclared_shaping", undeclared}, {"ambiguous", ambiguous}};
    if (!undeclared.empty()) {
        return result(CheckId::kUnsafeShaping, CheckStatus::kFail, details,
                      "undeclared reward shaping: " + join(undeclared));
    }
    if (!ambiguous.empty()) {
        return result(CheckId::kUnsafeShaping, CheckStatus::kWarning, details,
                      "possibly shaping: " + join(ambiguous));
    }
    return result(CheckId::kUnsafeShaping, CheckStatus::kPass, details, "no undeclared shaping");
}

bool potential_shaping_verify(const std::vector<ShapingSample>& samples, const Potential& phi, double gamma,
                              double tol) {
    const auto at = [&](std::size_t i) {
        auto it = phi.find(i);
        if (it == phi.end()) {
            throw AuditError(ErrorCode::kMissingPotential, "no potential for state index " + std::to_string(i));
        }
        return it->second;
    };
    bool ok = true;
    for (const auto& s : samples) {
        const double expected = gamma * at(s.next_state) - at(s.state);
        if (!(std::abs(s.value - expected) <= tol)) ok = false;
    }
    return ok;
}

std::set<OutcomeTag> implied_tags(EventKind kind) {
    switch (kind) {
        case EventKind::kCollision: return {OutcomeTag::kCollision};
        case EventKind::kGoal: return {OutcomeTag::kProgress};
        case EventKind::kTimeout: return {OutcomeTag::kTime};
        case EventKind::kLaneDeparture:
        case EventKind::kRedLight:
        case EventKind::kWrongLane: return {OutcomeTag::kLaw};
        case EventKind::kZeroSpeed: return {OutcomeTag::kProgress};
    }
    return {};
}

CheckResult attribute_coverage_lint(const RewardSpec& spec, const std::set<OutcomeTag>& required) {
    std::set<OutcomeTag> covered;
    for (const auto& a : spec.per_step_attributes)
        if (a.kind == AttributeKind::kOutcome) covered.insert(a.outcome_tags.begin(), a.outcome_tags.end());
    for (const auto& t : spec.terminal_rules) {
        const auto tags = implied_tags(t.on);
        covered.insert(tags.begin(), tags.end());
    }
    std::vector<std::string> missing;
    for (OutcomeTag tag : required)
        if (!covered.count(tag)) missing.emplace_back(to_string(tag));
    json details{{"missing", missing}};
    if (missing.empty()) {
        return result(CheckId::kMissingAttributes, CheckStatus::kPass, details, "all required outcomes covered");
    }
    return result(CheckId::kMissingAttributes, CheckStatus::kWarning, details,
                  "no attribute measures: " + join(missing));
}

CheckResult redundancy_lint(const RewardSpec& spec) {
    json pairs = json::array();
    std::vector<std::string> text;
    const auto& attrs = spec.per_step_attributes;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        for (std::size_t j = i + 1; j < attrs.size(); ++j) {
            std::vector<std::string> shared;
            for (OutcomeTag t : attrs[i].outcome_tags)
                if (attrs[j].outcome_tags.count(t)) shared.emplace_back(to_string(t));
            if (shared.empty()) continue;
            pairs.push_back({{"a", attrs[i].id}, {"b", attrs[j].id}, {"shared_tags", shared}});
            text.push_back(attrs[i].id + "/" + attrs[j].id + " (" + join(shared) + ")");
        }
    }
    json details{{"pairs", pairs}};
    if (text.empty()) return result(CheckId::kRedundantAttributes, CheckStatus::kPass, details, "no overlapping attributes");
    return result(CheckId::kRedundantAttributes, CheckStatus::kWarning, details,
                  "attributes measure the same outcome: " + join(text));
}

CheckResult trial_and_error_lint(const RewardSpec& spec) {
    const auto prov = spec.design_provenance;
    json details{{"provenance", prov ? json(std::string(to_string(*prov))) : json(nullptr)}};
    if (prov == DesignProvenance::kTrialAndError) {
        return result(CheckId::kTrialAndError, CheckStatus::kWarning, details,
                      "reward function was tuned by trial and error");
    }
    return result(CheckId::kTrialAndError, CheckStatus::kPass, details, "no trial-and-error design reported");
}

CheckResult completeness_lint(const RewardSpec& spec) {
    const EpisodeConfig& ep = spec.episode;
    std::vector<std::string> absent;
    if (!ep.discount) absent.emplace_back("discount");
    if (!ep.reward_step_s) absent.emplace_back("reward_step_s");
    if (ep.episodic && ep.termination_criteria.empty()) absent.emplace_back("termination_criteria");
    if (ep.episodic && !ep.time_limit_s && !ep.time_limit_at_kmh) absent.emplace_back("time_limit_s");
    if (!spec.design_provenance) absent.emplace_back("design_provenance");

    std::vector<std::string> notes;
    for (const auto& a : absent) notes.push_back("missing " + a);
    const bool tuned_without_declaration =
        spec.design_provenance == DesignProvenance::kTrialAndError && spec.declared_shaping_ids.empty();
    if (tuned_without_declaration) notes.emplace_back("trial-and-error design with no declared shaping");

    json details{{"absent", absent}, {"trial_and_error_without_declared_shaping", tuned_without_declaration}};
    if (notes.empty()) {
        return result(CheckId::kIncompleteSpecification, CheckStatus::kPass, details, "specification is complete");
    }
    return result(CheckId::kIncompleteSpecification, CheckStatus::kWarning, details, join(notes));
}

CheckResult loophole_check(const RewardSpec& spec, const Trajectory& undesirable, const Trajectory& clean) {
    const double g_bad = eval_return(spec, undesirable).total;
    const double g_clean = eval_return(spec, clean).total;
    json details{{"g_undesirable", g_bad}, {"g_clean", g_clean}, {"gain", g_bad - g_clean}};
    if (strictly_less(g_clean, g_bad)) {
        return result(CheckId::kLearnableLoophole, CheckStatus::kFail, details,
                      "undesirable behavior earns more return (+" + format_number(g_bad - g_clean) + ")");
    }
    return result(CheckId::kLearnableLoophole, CheckStatus::kPass, details, "undesirable behavior earns no extra return");
}

std::vector<CheckResult> lint_spec(const RewardSpec& spec, const std::set<OutcomeTag>& required) {
    return {shaping_lint(spec), attribute_coverage_lint(spec, required), redundancy_lint(spec),
            trial_and_error_lint(spec), completeness_lint(spec)};
}

CanonicalAudit audit_canonical(const RewardSpec& spec, const ScenarioSpec& scenario, const RiskBaseline& baseline) {
    CanonicalAudit audit{};
    const auto not_evaluable = [](CheckId id, const std::string& why) {
        return result(id, CheckStatus::kNotEvaluable, json{{"reason", why}}, why);
    };

    try {
        audit.crash = eval_return(spec, synth_canonical(scenario, spec, TrajectoryKind::kCrash));
        audit.idle = eval_return(spec, synth_canonical(scenario, spec, TrajectoryKind::kIdle));
        audit.succ = eval_return(spec, synth_canonical(scenario, spec, TrajectoryKind::kSucc));
    } catch (const AuditError& e) {
        if (e.code() != ErrorCode::kNotEvaluable) throw;
        audit.crash.reset();
        audit.idle.reset();
        audit.succ.reset();
        audit.not_evaluable_reason = e.what();
    }

    if (!audit.evaluable()) {
        audit.preference = not_evaluable(CheckId::kPreferenceMismatch, audit.not_evaluable_reason);
        audit.risk = not_evaluable(CheckId::kRiskTolerance, audit.not_evaluable_reason);
    } else {
        const double g_crash = audit.crash->total;
        const double g_idle = audit.idle->total;
        const double g_succ = audit.succ->total;
        audit.preference = preference_check(g_crash, g_idle);
        const double path = scenario.path_length_km.value_or(0.0);
        if (audit.preference.status == CheckStatus::kPass) {
            if (strictly_less(g_idle, g_succ)) {
                audit.p = indifference_point(g_crash, g_idle, g_succ);
                audit.km_per_collision = km_per_collision(*audit.p, path);
            } else {
                audit.km_per_collision = std::numeric_limits<double>::infinity();
            }
        } else {
            // Crashing is weakly preferred to idling, so any collision risk is acceptable: the p -> 0 limit.
            audit.km_per_collision = km_per_collision(0.0, path);
        }
        audit.risk = risk_tolerance_check(*audit.km_per_collision, baseline);
        audit.risk.details["p"] = audit.p ? json(*audit.p) : json(nullptr);
    }

    if (scenario.loophole_edits.empty()) {
        audit.loophole = not_evaluable(CheckId::kLearnableLoophole, "scenario defines no loophole edits");
    } else {
        try {
            const Trajectory clean = synth_canonical(scenario, spec, scenario.loophole_base);
            std::vector<TrajectoryEdit> edits;
            for (const auto& [name, edit] : scenario.loophole_edits) edits.push_back(edit);
            audit.loophole = loophole_check(spec, synth_custom(clean, edits), clean);
            json names = json::array();
            for (const auto& [name, edit] : scenario.loophole_edits) names.push_back(name);
            audit.loophole.details["edits"] = names;
        } catch (const AuditError& e) {
            if (e.code() != ErrorCode::kNotEvaluable) throw;
            audit.loophole = not_evaluable(CheckId::kLearnableLoophole, e.what());
        }
    }
    return audit;
}

}  // namespace reward_audit
