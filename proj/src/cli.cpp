#include "reward_audit/cli.hpp"

#include "reward_audit/checks.hpp"
#include "reward_audit/corpus.hpp"
#include "reward_audit/report.hpp"
#include "reward_audit/spec_lang.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace reward_audit {

namespace fs = std::filesystem;

namespace {

// Raised for problems with the invocation itself; reported with exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<RiskBaseline> configured_baselines() {
    std::vector<RiskBaseline> baselines = default_baselines();
    const char* path = std::getenv("REWARD_AUDIT_BASELINES");
    if (path == nullptr || *path == '\0') return baselines;
    const ScenarioSpec overrides = parse_scenario(read_file(path));
    return merge_baselines(std::move(baselines), overrides.baselines);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

void print_findings(const std::vector<ValidationFinding>& findings, std::ostream& err) {
    for (const auto& f : findings) {
        err << to_string(f.severity) << ": " << to_string(f.code);
        if (!f.locator.empty()) err << " at " << f.locator;
        err << ": " << f.message << "\n";
    }
}

void print_check(const CheckResult& c, std::ostream& out) {
    out << "[" << to_string(c.status) << "] " << static_cast<int>(c.check_id) << " " << check_title(c.check_id) << ": "
        << c.message << "\n";
}

int exit_code(const std::vector<CheckResult>& results, bool strict) {
    for (const auto& c : results) {
        if (c.status == CheckStatus::kFail) return kExitFindings;
        if (strict && c.status == CheckStatus::kWarning) return kExitFindings;
    }
    return kExitOk;
}

struct LoadedSpec {
    RewardSpec spec;
    // Corpus entry the reward spec came from when the file itself was not on disk.
    const CorpusEntry* embedded = nullptr;
};

const CorpusEntry* find_corpus_entry(const fs::path& path) {
    try {
        return &corpus_entry(path.stem().string());
    } catch (const AuditError&) {
        return nullptr;
    }
}

// Reads a spec from disk. A missing file named after a corpus entry or alias
// resolves to the embedded copy, so `check isele18.rspec --canonical` works anywhere.
LoadedSpec load_spec(const fs::path& path, std::ostream& err) {
    LoadedSpec loaded;
    if (fs::exists(path)) {
        loaded.spec = parse_spec(read_file(path));
    } else if (const CorpusEntry* entry = find_corpus_entry(path)) {
        loaded.spec = entry->spec;
        loaded.embedded = entry;
    } else {
        throw UsageError("cannot read " + path.string());
    }
    const auto findings = validate_spec(loaded.spec);
    print_findings(findings, err);
    if (has_errors(findings)) throw UsageError(path.string() + " is not a valid reward specification");
    return loaded;
}

ScenarioSpec load_scenario(const fs::path& path, std::ostream& err) {
    ScenarioSpec scenario = parse_scenario(read_file(path));
    const auto findings = validate_scenario(scenario);
    print_findings(findings, err);
    if (has_errors(findings)) throw UsageError(path.string() + " is not a valid scenario");
    return scenario;
}

ScenarioSpec canonical_scenario(const fs::path& spec_path, const LoadedSpec& loaded, std::ostream& err) {
    fs::path sibling = spec_path;
    sibling.replace_extension(".scn");
    if (fs::exists(sibling)) return load_scenario(sibling, err);
    const CorpusEntry* entry = loaded.embedded ? loaded.embedded : find_corpus_entry(spec_path);
    if (entry == nullptr) {
        throw UsageError("no scenario for " + spec_path.string() + ": pass --scenario or place " +
                         sibling.filename().string() + " next to it");
    }
    if (!entry->scenario) {
        throw AuditError(ErrorCode::kNotEvaluable, entry->id + " has no canonical scenario");
    }
    return *entry->scenario;
}

std::vector<CheckId> parse_check_ids(const std::string& text) {
    std::vector<CheckId> ids;
    for (const auto& item : split_list(text)) {
        if (item != "2" && item != "3" && item != "4") {
            throw UsageError("--checks accepts 2, 3 and 4, got '" + item + "'");
        }
        const auto id = static_cast<CheckId>(item[0] - '0');
        if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    if (ids.empty()) throw UsageError("--checks is empty");
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::set<OutcomeTag> parse_required_tags(const std::string& text) {
    std::set<OutcomeTag> tags;
    for (const auto& item : split_list(text)) {
        const auto tag = parse_outcome_tag(item);
        if (!tag) throw UsageError("unknown outcome tag '" + item + "'");
        tags.insert(*tag);
    }
    return tags;
}

int cmd_lint(const std::string& path, bool strict, const std::string& require, std::ostream& out, std::ostream& err) {
    const LoadedSpec loaded = load_spec(path, err);
    const std::set<OutcomeTag> required = require.empty()
                                              ? std::set<OutcomeTag>(all_outcome_tags().begin(), all_outcome_tags().end())
                                              : parse_required_tags(require);
    const auto results = lint_spec(loaded.spec, required);
    for (const auto& c : results) print_check(c, out);
    return exit_code(results, strict);
}

int cmd_check(const std::string& path, const std::string& scenario_path, bool canonical, const std::string& checks,
              const std::string& baseline_label, bool strict, std::ostream& out, std::ostream& err) {
    const std::vector<CheckId> ids = parse_check_ids(checks);
    const auto baselines = configured_baselines();
    const RiskBaseline& baseline = find_baseline(baselines, baseline_label);
    const LoadedSpec loaded = load_spec(path, err);
    const ScenarioSpec scenario =
        canonical ? canonical_scenario(path, loaded, err) : load_scenario(scenario_path, err);

    const CanonicalAudit audit = audit_canonical(loaded.spec, scenario, baseline);
    if (audit.evaluable()) {
        out << "G(crash) = " << format_fixed(audit.crash->total, 4) << "\n";
        out << "G(idle) = " << format_fixed(audit.idle->total, 4) << "\n";
        out << "G(succ) = " << format_fixed(audit.succ->total, 4) << "\n";
    } else {
        out << "not evaluable: " << audit.not_evaluable_reason << "\n";
    }
    if (audit.p) out << "p = " << format_fixed(*audit.p, kPDecimals) << "\n";
    if (audit.km_per_collision) {
        out << "km per collision = " << format_fixed(*audit.km_per_collision, kKmDecimals) << "\n";
    }

    std::vector<CheckResult> results;
    for (CheckId id : ids) {
        switch (id) {
            case CheckId::kPreferenceMismatch: results.push_back(audit.preference); break;
            case CheckId::kRiskTolerance: results.push_back(audit.risk); break;
            default: results.push_back(audit.loophole); break;
        }
    }
    for (const auto& c : results) print_check(c, out);
    return exit_code(results, strict);
}

int cmd_corpus_list(std::ostream& out) {
    for (const auto& e : corpus_list()) {
        out << e.id << "\t" << (e.evaluable ? "evaluable" : "not_evaluable") << "\t" << e.title << "\n";
    }
    return kExitOk;
}

int cmd_corpus_run(const std::string& out_path, const std::string& format_text, const std::string& baseline_label,
                   std::ostream& out, std::ostream& err) {
    const auto format = parse_report_format(format_text);
    if (!format) throw UsageError("unknown format '" + format_text + "'");
    const AuditReport report = corpus_run({}, configured_baselines(), baseline_label);
    const std::string bytes = emit_report(report, *format);
    if (out_path.empty()) {
        out << bytes;
    } else {
        std::ofstream file(out_path, std::ios::binary);
        if (!file) throw UsageError("cannot write " + out_path);
        file << bytes;
        if (!file) throw UsageError("cannot write " + out_path);
    }
    const std::size_t mismatches = report.reproduction_mismatches();
    if (mismatches > 0) {
        err << mismatches << " reference value(s) not reproduced\n";
        return kExitFindings;
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Audits reward functions for automated driving", "reward-audit"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    std::string spec_path, scenario_path, require, checks = "2,3,4", out_path, format = "text";
    std::string baseline_label{kDefaultBaselineLabel};
    bool strict = false, canonical = false;

    auto* lint = app.add_subcommand("lint", "Static checks 1 and 5-8 on a reward specification");
    lint->add_option("spec", spec_path, "Path to a .rspec file")->required();
    lint->add_flag("--strict", strict, "Treat warnings as findings");
    lint->add_option("--require", require, "Comma-separated outcome tags the attributes must cover (default: all)");

    auto* check = app.add_subcommand("check", "Trajectory checks 2-4 against a scenario");
    check->add_option("spec", spec_path, "Path to a .rspec file")->required();
    auto* scn_opt = check->add_option("--scenario", scenario_path, "Path to a .scn file");
    auto* canon_flag = check->add_flag("--canonical", canonical, "Use the sibling .scn or the built-in corpus scenario");
    scn_opt->excludes(canon_flag);
    check->add_option("--checks", checks, "Comma-separated subset of 2,3,4");
    check->add_option("--baseline", baseline_label, "Risk baseline label");
    check->add_flag("--strict", strict, "Treat warnings as findings");

    auto* corpus = app.add_subcommand("corpus", "Built-in corpus of published reward functions");
    corpus->require_subcommand(1);
    auto* list = corpus->add_subcommand("list", "List corpus entries");
    auto* run = corpus->add_subcommand("run", "Audit every corpus entry");
    run->add_option("--out", out_path, "Write the report to this file instead of stdout");
    run->add_option("--format", format, "text, md, csv or jsonl");
    run->add_option("--baseline", baseline_label, "Risk baseline label");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (lint->parsed()) return cmd_lint(spec_path, strict, require, out, err);
        if (check->parsed()) {
            if (!canonical && scenario_path.empty()) throw UsageError("check needs --scenario FILE or --canonical");
            return cmd_check(spec_path, scenario_path, canonical, checks, baseline_label, strict, out, err);
        }
        if (list->parsed()) return cmd_corpus_list(out);
        if (run->parsed()) return cmd_corpus_run(out_path, format, baseline_label, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const AuditError& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace reward_audit
