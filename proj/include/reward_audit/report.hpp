#pragma once

#include "reward_audit/checks.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace reward_audit {

inline constexpr std::string_view kToolVersion = "reward-audit 1.0.0";
inline constexpr std::string_view kCorpusVersion = "corpus-1";

enum class Quantity { kGCrash, kGIdle, kGSucc, kP, kKmPerCollision };
std::string_view to_string(Quantity quantity);

enum class ValueProvenance { kStated, kFormulaDerived };
std::string_view to_string(ValueProvenance provenance);

/// A reference number for one corpus quantity.
struct ExpectedValue {
    Quantity quantity;
    double value;
    /// Printed decimals; also sets the tolerance of stated values.
    int decimals;
    ValueProvenance provenance;
    /// Stated value that the entry's own formulas are known not to reproduce.
    bool discrepant = false;

    /// Half a unit in the last printed place for stated values, 1e-6 relative for derived ones.
    double tolerance(double derived_relative = 1e-6) const;
};

enum class ReproductionStatus { kMatch, kDiscrepancy, kMismatch };
std::string_view to_string(ReproductionStatus status);

struct Reproduction {
    ExpectedValue expected;
    std::optional<double> computed;
    ReproductionStatus status = ReproductionStatus::kMatch;
};

struct EntryReport {
    std::string entry_id;
    std::string title;
    bool evaluable = false;
    std::optional<double> g_crash;
    std::optional<double> g_idle;
    std::optional<double> g_succ;
    /// Printed decimals per return, in crash/idle/succ order.
    int decimals[3] = {2, 2, 2};
    CheckStatus preference_status = CheckStatus::kNotEvaluable;
    std::optional<double> p;
    std::optional<double> km_per_collision;
    std::vector<CheckResult> checks;
    std::vector<Reproduction> reproductions;
    std::vector<std::string> discrepancy_notes;

    const CheckResult* find_check(CheckId id) const;
};

struct FigureRow {
    std::string entry_id;
    std::optional<double> km_per_collision;
    bool evaluable = false;
};

struct AuditReport {
    std::string tool_version{kToolVersion};
    std::string corpus_version{kCorpusVersion};
    std::string baseline_label;
    double baseline_km_per_collision = 0.0;
    std::vector<EntryReport> entries;
    /// Per check, how many entries ended in each status. Filled by summarize().
    std::map<CheckId, std::map<CheckStatus, int>> summary;

    std::vector<FigureRow> figure_rows() const;
    std::size_t reproduction_mismatches() const;
};

/// Sorts entries by id and recomputes the summary tallies.
void summarize(AuditReport& report);

enum class ReportFormat { kText, kMarkdown, kCsv, kJsonl };
std::optional<ReportFormat> parse_report_format(std::string_view text);

/// Fixed-point text with `decimals` places; never prints a negative zero.
std::string format_fixed(double value, int decimals);

inline constexpr int kPDecimals = 4;
inline constexpr int kKmDecimals = 2;

std::string emit_report(const AuditReport& report, ReportFormat format);

}  // namespace reward_audit
