#pragma once

#include "reward_audit/report.hpp"
#include "reward_audit/spec_model.hpp"
#include "reward_audit/trajectory.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reward_audit {

struct CorpusEntry {
    std::string id;
    std::string title;
    std::vector<std::string> aliases;
    RewardSpec spec;
    std::optional<ScenarioSpec> scenario;
    std::string_view spec_text;
    std::string_view scenario_text;
    bool evaluable = false;
    std::vector<ExpectedValue> expected;
    std::vector<std::string> discrepancy_notes;

    /// Expected values for `quantity`, stated ones first.
    std::vector<const ExpectedValue*> expected_for(Quantity quantity) const;
    /// The value used for checks and printing: formula-derived when present, else stated.
    const ExpectedValue* reference(Quantity quantity) const;
};

struct CorpusListing {
    std::string id;
    std::string title;
    bool evaluable;
};

std::vector<CorpusListing> corpus_list();

/// Looks up an entry by id or alias (e.g. "isele18"). Throws AuditError kUnknownEntry.
const CorpusEntry& corpus_entry(std::string_view id_or_alias);

const std::vector<CorpusEntry>& corpus_entries();

struct Tolerances {
    double derived_relative = 1e-6;
};

/// Audits every entry: canonical returns, checks 1-8 and reproduction of the reference values.
AuditReport corpus_run(const Tolerances& tolerances = {},
                       const std::vector<RiskBaseline>& baselines = default_baselines(),
                       std::string_view baseline_label = kDefaultBaselineLabel);

}  // namespace reward_audit
