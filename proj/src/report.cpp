#include "reward_audit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace reward_audit {

using nlohmann::json;

std::string_view to_string(Quantity quantity) {
    switch (quantity) {
        case Quantity::kGCrash: return "g_crash";
        case Quantity::kGIdle: return "g_idle";
        case Quantity::kGSucc: return "g_succ";
        case Quantity::kP: return "p";
        case Quantity::kKmPerCollision: return "km_per_collision";
    }
    return "?";
}

std::string_view to_string(ValueProvenance provenance) {
    return provenance == ValueProvenance::kStated ? "stated" : "formula-derived";
}

std::string_view to_string(ReproductionStatus status) {
    switch (status) {
        case ReproductionStatus::kMatch: return "match";
        case ReproductionStatus::kDiscrepancy: return "discrepancy";
        case ReproductionStatus::kMismatch: return "mismatch";
    }
    return "?";
}

double ExpectedValue::tolerance(double derived_relative) const {
    if (provenance == ValueProvenance::kStated) return 0.5 * std::pow(10.0, -decimals);
    return derived_relative * std::max(1.0, std::abs(value));
}

const CheckResult* EntryReport::find_check(CheckId id) const {
    for (const auto& c : checks)
        if (c.check_id == id) return &c;
    return nullptr;
}

std::vector<FigureRow> AuditReport::figure_rows() const {
    std::vector<FigureRow> rows;
    for (const auto& e : entries) rows.push_back({e.entry_id, e.km_per_collision, e.evaluable});
    return rows;
}

std::size_t AuditReport::reproduction_mismatches() const {
    std::size_t n = 0;
    for (const auto& e : entries)
        for (const auto& r : e.reproductions) n += r.status == ReproductionStatus::kMismatch;
    return n;
}

void summarize(AuditReport& report) {
    std::sort(report.entries.begin(), report.entries.end(),
              [](const auto& a, const auto& b) { return a.entry_id < b.entry_id; });
    report.summary.clear();
    for (CheckId id : all_check_ids()) report.summary[id];
    for (const auto& e : report.entries)
        for (const auto& c : e.checks) ++report.summary[c.check_id][c.status];
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
    if (text == "text") return ReportFormat::kText;
    if (text == "md" || text == "markdown") return ReportFormat::kMarkdown;
    if (text == "csv") return ReportFormat::kCsv;
    if (text == "jsonl") return ReportFormat::kJsonl;
    return std::nullopt;
}

std::string format_fixed(double value, int decimals) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string out(buf);
    if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
    return out;
}

namespace {

std::string opt_fixed(const std::optional<double>& v, int decimals) {
    if (!v || !std::isfinite(*v)) return "";
    return format_fixed(*v, decimals);
}

// Numbers go into JSON through their printed form so both data formats agree.
json opt_json(const std::optional<double>& v, int decimals) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return json::parse(format_fixed(*v, decimals));
}

struct Row {
    std::string id, g_crash, g_idle, g_succ, preference, p, km;
    bool evaluable;
};

Row row_of(const EntryReport& e) {
    return {e.entry_id,
            opt_fixed(e.g_crash, e.decimals[0]),
            opt_fixed(e.g_idle, e.decimals[1]),
            opt_fixed(e.g_succ, e.decimals[2]),
            std::string(to_string(e.preference_status)),
            opt_fixed(e.p, kPDecimals),
            opt_fixed(e.km_per_collision, kKmDecimals),
            e.evaluable};
}

void emit_csv(const AuditReport& report, std::ostringstream& out) {
    out << "entry_id,g_crash,g_idle,g_succ,preference_status,p,km_per_collision,evaluable\n";
    for (const auto& e : report.entries) {
        const Row r = row_of(e);
        out << r.id << ',' << r.g_crash << ',' << r.g_idle << ',' << r.g_succ << ',' << r.preference << ',' << r.p
            << ',' << r.km << ',' << (r.evaluable ? "true" : "false") << '\n';
    }
}

void emit_jsonl(const AuditReport& report, std::ostringstream& out) {
    for (const auto& e : report.entries) {
        json obj{{"entry_id", e.entry_id},
                 {"g_crash", opt_json(e.g_crash, e.decimals[0])},
                 {"g_idle", opt_json(e.g_idle, e.decimals[1])},
                 {"g_succ", opt_json(e.g_succ, e.decimals[2])},
                 {"preference_status", to_string(e.preference_status)},
                 {"p", opt_json(e.p, kPDecimals)},
                 {"km_per_collision", opt_json(e.km_per_collision, kKmDecimals)},
                 {"evaluable", e.evaluable}};
        out << obj.dump() << '\n';
    }
}

std::string escape_md(std::string s) {
    std::string out;
    for (char c : s) {
        if (c == '|') out += "\\|";
        else if (c == '\n') out += ' ';
        else out += c;
    }
    return out;
}

void emit_summary_text(const AuditReport& report, std::ostringstream& out, bool markdown) {
    for (const auto& [id, counts] : report.summary) {
        const auto count = [&](CheckStatus s) {
            auto it = counts.find(s);
            return it == counts.end() ? 0 : it->second;
        };
        if (markdown) out << "| " << static_cast<int>(id) << " | " << check_title(id) << " | ";
        else out << "  " << static_cast<int>(id) << ". " << check_title(id) << ": ";
        out << count(CheckStatus::kPass) << " pass, " << count(CheckStatus::kFail) << " fail, "
            << count(CheckStatus::kWarning) << " warning, " << count(CheckStatus::kNotEvaluable) << " not evaluable";
        out << (markdown ? " |\n" : "\n");
    }
}

std::string reproduction_line(const Reproduction& r) {
    const int d = r.expected.decimals;
    std::string line = std::string(to_string(r.expected.quantity)) + " " +
                       std::string(to_string(r.expected.provenance)) + " " + format_fixed(r.expected.value, d) +
                       ", computed " + (r.computed ? format_fixed(*r.computed, std::max(d, 4)) : "n/a") + ": " +
                       std::string(to_string(r.status));
    return line;
}

void emit_markdown(const AuditReport& report, std::ostringstream& out) {
    out << "# Reward function audit\n\n";
    out << report.tool_version << ", " << report.corpus_version << ". Risk baseline: " << report.baseline_label << " ("
        << format_fixed(report.baseline_km_per_collision, kKmDecimals) << " km per collision).\n\n";
    out << "## Summary\n\n| # | Sanity check | Tally |\n|---|---|---|\n";
    emit_summary_text(report, out, true);

    out << "\n## Figure data\n\n| entry_id | km_per_collision | evaluable |\n|---|---|---|\n";
    for (const auto& row : report.figure_rows()) {
        out << "| " << row.entry_id << " | " << opt_fixed(row.km_per_collision, kKmDecimals) << " | "
            << (row.evaluable ? "true" : "false") << " |\n";
    }

    for (const auto& e : report.entries) {
        const Row r = row_of(e);
        out << "\n## " << e.entry_id << ": " << escape_md(e.title) << "\n\n";
        if (e.evaluable) {
            out << "G(crash) = " << r.g_crash << ", G(idle) = " << r.g_idle << ", G(succ) = " << r.g_succ;
            if (!r.p.empty()) out << ", p = " << r.p;
            if (!r.km.empty()) out << ", km per collision = " << r.km;
            out << "\n\n";
        } else {
            out << "Not evaluable.\n\n";
        }
        out << "| # | Sanity check | Status | Details |\n|---|---|---|---|\n";
        for (const auto& c : e.checks) {
            out << "| " << static_cast<int>(c.check_id) << " | " << check_title(c.check_id) << " | "
                << to_string(c.status) << " | " << escape_md(c.message) << " |\n";
        }
        if (!e.reproductions.empty()) {
            out << "\nReference values:\n\n";
            for (const auto& rep : e.reproductions) out << "- " << reproduction_line(rep) << "\n";
        }
        for (const auto& note : e.discrepancy_notes) out << "\n> " << escape_md(note) << "\n";
    }
}

void emit_text(const AuditReport& report, std::ostringstream& out) {
    out << report.tool_version << " (" << report.corpus_version << ")\n";
    out << "risk baseline: " << report.baseline_label << " = "
        << format_fixed(report.baseline_km_per_collision, kKmDecimals) << " km per collision\n\n";
    for (const auto& e : report.entries) {
        const Row r = row_of(e);
        out << e.entry_id << "  " << e.title << "\n";
        if (e.evaluable) {
            out << "  returns: crash " << r.g_crash << ", idle " << r.g_idle << ", succ " << r.g_succ << "\n";
            out << "  p " << (r.p.empty() ? "-" : r.p) << ", km per collision " << (r.km.empty() ? "-" : r.km)
                << "\n";
        } else {
            out << "  not evaluable\n";
        }
        for (const auto& c : e.checks) {
            out << "  [" << to_string(c.status) << "] " << static_cast<int>(c.check_id) << " " << check_title(c.check_id)
                << ": " << c.message << "\n";
        }
        for (const auto& rep : e.reproductions) out << "  reference " << reproduction_line(rep) << "\n";
        for (const auto& note : e.discrepancy_notes) out << "  note: " << note << "\n";
        out << "\n";
    }
    out << "summary:\n";
    emit_summary_text(report, out, false);
    out << "reference mismatches: " << report.reproduction_mismatches() << "\n";
}

}  // namespace

std::string emit_report(const AuditReport& report, ReportFormat format) {
    std::ostringstream out;
    switch (format) {
        case ReportFormat::kCsv: emit_csv(report, out); break;
        case ReportFormat::kJsonl: emit_jsonl(report, out); break;
        case ReportFormat::kMarkdown: emit_markdown(report, out); break;
        case ReportFormat::kText: emit_text(report, out); break;
    }
    return out.str();
}

}  // namespace reward_audit
