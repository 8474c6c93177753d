#include "reward_audit/corpus.hpp"

#include "corpus_data.hpp"
#include "reward_audit/checks.hpp"
#include "reward_audit/spec_lang.hpp"

#include <algorithm>
#include <cmath>

namespace reward_audit {

namespace {

using Q = Quantity;
constexpr auto kStated = ValueProvenance::kStated;
constexpr auto kDerived = ValueProvenance::kFormulaDerived;

struct EntrySeed {
    const char* id;
    const char* title;
    std::vector<std::string> aliases;
    std::vector<ExpectedValue> expected;
    std::vector<std::string> notes;
};

ExpectedValue stated(Q q, double v, int decimals, bool discrepant = false) { return {q, v, decimals, kStated, discrepant}; }
ExpectedValue derived(Q q, double v, int decimals) { return {q, v, decimals, kDerived, false}; }

std::vector<EntrySeed> seeds() {
    const double cai_crash = -0.1 * 148 - 0.1 * 9.1 - 1000.0 * (std::pow(40.0 / 29.6, 2) + 0.5);
    const double min_crash = 1.0 * 675 + 0.5 * 8.5 - 0.25 * 8.5 - 10.0;
    const double min_succ = 1.0 * 1350 + 0.5 * 17 - 0.25 * 17;
    return {
        {"cai19",
         "LeTS-Drive: Driving in a Crowd by Learning from Tree Search",
         {"cai2019", "lets_drive"},
         {stated(Q::kGCrash, -515.71, 2, true), derived(Q::kGCrash, cai_crash, 2), stated(Q::kGIdle, -120, 0),
          stated(Q::kGSucc, -31.42, 2), stated(Q::kP, 0.9617, 4), stated(Q::kKmPerCollision, 1.02, 2)},
         {"cai19 crash return: the stated -515.71 is not reproduced by the reward formula, which gives "
          "-14.8 - 0.91 - 1000 * ((40 / 29.6)^2 + 0.5) = -2341.86. Only the formula value reproduces the stated "
          "p = 0.9617 and 1.02 km per collision, so checks use it."}},
        {"chen19",
         "Model-free Deep Reinforcement Learning for Urban Autonomous Driving",
         {"chen2019"},
         {stated(Q::kGCrash, 601.5, 1), stated(Q::kGIdle, -50.0, 1), stated(Q::kGSucc, 1225.0, 1)},
         {}},
        {"dos17",
         "CARLA: An Open Urban Driving Simulator",
         {"dosovitskiy17", "dosovitskiy2017"},
         {stated(Q::kGCrash, 501.00, 2), stated(Q::kGIdle, 0, 0), stated(Q::kGSucc, 1003, 0)},
         {"dos17 speed-change attribute: the 60 km/h increase is credited once at the start of the drive; a "
          "per-step reading of the change in speed is unspecified."}},
        {"hue19",
         "Dynamic Input for Deep Reinforcement Learning in Autonomous Driving",
         {"huegle19", "huegle2019"},
         {},
         {}},
        {"ise18",
         "Navigating Occluded Intersections with Autonomous Vehicles using Deep Reinforcement Learning",
         {"isele18", "isele2018"},
         {stated(Q::kGCrash, -10.1, 1), stated(Q::kGIdle, -1, 0), stated(Q::kGSucc, 0.8, 1), stated(Q::kP, 0.8349, 4),
          stated(Q::kKmPerCollision, 0.11, 2)},
         {}},
        {"jar18",
         "End-to-End Race Driving with Deep Reinforcement Learning",
         {"jaritz18", "jaritz2018"},
         {stated(Q::kGCrash, 532980, 0), stated(Q::kGIdle, 0, 0), stated(Q::kGSucc, 1065960, 0)},
         {}},
        {"lia18",
         "CIRL: Controllable Imitative Reinforcement Learning for Vision-based Self-driving",
         {"liang18", "liang2018"},
         {stated(Q::kGCrash, 16900, 0), stated(Q::kGIdle, 0, 0), stated(Q::kGSucc, 36000, 0)},
         {}},
        {"min19",
         "Deep Distributional Reinforcement Learning Based High-Level Driving Policy Determination",
         {"min2019"},
         {stated(Q::kGCrash, 673.9, 1, true), derived(Q::kGCrash, min_crash, 3), stated(Q::kGIdle, 0, 0),
          stated(Q::kGSucc, 1357.9, 1, true), derived(Q::kGSucc, min_succ, 2)},
         {"min19 crash and succ returns: the stated 673.9 and 1357.9 differ from the formula values 667.125 and "
          "1354.25 (675 or 1350 speed steps plus 0.25 per overtake with its lane change, minus 10 on collision). "
          "Checks use the formula values; the preference outcome is the same either way."}},
        {"tor20",
         "End-to-End Model-Free Reinforcement Learning for Urban Driving using Implicit Affordances",
         {"toromanoff20", "toromanoff2020"},
         {stated(Q::kGCrash, 599, 0), stated(Q::kGIdle, 25, 0), stated(Q::kGSucc, 1200, 0)},
         {"tor20 idle return: 25 leaves out the -1 termination reward at the zero-speed cutoff; applying it would "
          "give 24. The scenario follows the stated 25."}},
        {"wan20",
         "Learning hierarchical behavior and motion planning for autonomous driving",
         {"wang20", "wang2020"},
         {stated(Q::kGCrash, 174.8, 1), stated(Q::kGIdle, -3711.2, 1), stated(Q::kGSucc, 549.6, 1)},
         {}},
    };
}

std::string_view find_document(std::string_view filename) {
    for (const auto& doc : detail::embedded_documents())
        if (doc.filename == filename) return doc.text;
    return {};
}

std::vector<CorpusEntry> load_entries() {
    std::vector<CorpusEntry> entries;
    for (auto& seed : seeds()) {
        CorpusEntry e;
        e.id = seed.id;
        e.title = seed.title;
        e.aliases = std::move(seed.aliases);
        e.expected = std::move(seed.expected);
        e.discrepancy_notes = std::move(seed.notes);
        e.spec_text = find_document(e.id + ".rspec");
        if (e.spec_text.empty()) throw AuditError(ErrorCode::kUnknownEntry, "corpus is missing " + e.id + ".rspec");
        e.spec = parse_spec(e.spec_text);
        e.scenario_text = find_document(e.id + ".scn");
        if (!e.scenario_text.empty()) e.scenario = parse_scenario(e.scenario_text);
        e.evaluable = e.scenario.has_value() && e.spec.episode.episodic;
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return entries;
}

bool matches(const ExpectedValue& ev, double computed, const Tolerances& tol) {
    if (ev.provenance == kStated) {
        // Compare at printed precision.
        return std::abs(computed - ev.value) <= ev.tolerance() + 1e-12;
    }
    return std::abs(computed - ev.value) <= ev.tolerance(tol.derived_relative);
}

}  // namespace

std::vector<const ExpectedValue*> CorpusEntry::expected_for(Quantity quantity) const {
    std::vector<const ExpectedValue*> out;
    for (const auto& ev : expected)
        if (ev.quantity == quantity && ev.provenance == kStated) out.push_back(&ev);
    for (const auto& ev : expected)
        if (ev.quantity == quantity && ev.provenance == kDerived) out.push_back(&ev);
    return out;
}

const ExpectedValue* CorpusEntry::reference(Quantity quantity) const {
    const ExpectedValue* best = nullptr;
    for (const auto& ev : expected) {
        if (ev.quantity != quantity) continue;
        if (ev.provenance == kDerived) return &ev;
        if (!best) best = &ev;
    }
    return best;
}

const std::vector<CorpusEntry>& corpus_entries() {
    static const std::vector<CorpusEntry> entries = load_entries();
    return entries;
}

std::vector<CorpusListing> corpus_list() {
    std::vector<CorpusListing> out;
    for (const auto& e : corpus_entries()) out.push_back({e.id, e.title, e.evaluable});
    return out;
}

const CorpusEntry& corpus_entry(std::string_view id_or_alias) {
    for (const auto& e : corpus_entries()) {
        if (e.id == id_or_alias) return e;
        if (std::find(e.aliases.begin(), e.aliases.end(), id_or_alias) != e.aliases.end()) return e;
    }
    throw AuditError(ErrorCode::kUnknownEntry, "unknown corpus entry '" + std::string(id_or_alias) + "'");
}

AuditReport corpus_run(const Tolerances& tolerances, const std::vector<RiskBaseline>& baselines,
                       std::string_view baseline_label) {
    const RiskBaseline& baseline = find_baseline(baselines, baseline_label);
    AuditReport report;
    report.baseline_label = baseline.label;
    report.baseline_km_per_collision = baseline.km_per_collision;
    const std::set<OutcomeTag> required(all_outcome_tags().begin(), all_outcome_tags().end());

    for (const auto& entry : corpus_entries()) {
        EntryReport row;
        row.entry_id = entry.id;
        row.title = entry.title;
        row.discrepancy_notes = entry.discrepancy_notes;
        const Quantity kinds[3] = {Q::kGCrash, Q::kGIdle, Q::kGSucc};
        for (int i = 0; i < 3; ++i) {
            if (const auto* ref = entry.reference(kinds[i])) row.decimals[i] = ref->decimals;
        }

        std::vector<CheckResult> lint = lint_spec(entry.spec, required);
        CheckResult preference{}, risk{}, loophole{};
        if (entry.scenario) {
            CanonicalAudit audit = audit_canonical(entry.spec, *entry.scenario, baseline);
            row.evaluable = audit.evaluable();
            if (audit.evaluable()) {
                row.g_crash = audit.crash->total;
                row.g_idle = audit.idle->total;
                row.g_succ = audit.succ->total;
            }
            row.p = audit.p;
            row.km_per_collision = audit.km_per_collision;
            preference = std::move(audit.preference);
            risk = std::move(audit.risk);
            loophole = std::move(audit.loophole);
        } else {
            const std::string why = entry.spec.episode.episodic
                                        ? "no scenario is defined for this entry"
                                        : "continuing task without collisions or a goal; no canonical drives exist";
            const nlohmann::json details{{"reason", why}};
            preference = {CheckId::kPreferenceMismatch, CheckStatus::kNotEvaluable, details, why};
            risk = {CheckId::kRiskTolerance, CheckStatus::kNotEvaluable, details, why};
            loophole = {CheckId::kLearnableLoophole, CheckStatus::kNotEvaluable, details, why};
        }
        row.preference_status = preference.status;

        row.checks.push_back(lint[0]);
        row.checks.push_back(std::move(preference));
        row.checks.push_back(std::move(risk));
        row.checks.push_back(std::move(loophole));
        for (std::size_t i = 1; i < lint.size(); ++i) row.checks.push_back(lint[i]);

        for (const auto& ev : entry.expected) {
            std::optional<double> computed;
            switch (ev.quantity) {
                case Q::kGCrash: computed = row.g_crash; break;
                case Q::kGIdle: computed = row.g_idle; break;
                case Q::kGSucc: computed = row.g_succ; break;
                case Q::kP: computed = row.p; break;
                case Q::kKmPerCollision: computed = row.km_per_collision; break;
            }
            Reproduction rep{ev, computed, ReproductionStatus::kMatch};
            if (!computed || !matches(ev, *computed, tolerances)) {
                rep.status = ev.discrepant ? ReproductionStatus::kDiscrepancy : ReproductionStatus::kMismatch;
            }
            row.reproductions.push_back(rep);
        }
        report.entries.push_back(std::move(row));
    }
    summarize(report);
    return report;
}

}  // namespace reward_audit
