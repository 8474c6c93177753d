#include "reward_audit/checks.hpp"
#include "reward_audit/cli.hpp"
#include "reward_audit/corpus.hpp"
#include "reward_audit/evaluator.hpp"
#include "reward_audit/spec_lang.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace reward_audit;
using reward_audit::testing::Gen;
using reward_audit::testing::kPropertyCases;

namespace {

// Each criterion returns an empty string on success or the reason it failed.
using Criterion = std::function<std::string()>;

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

const AuditReport& report() {
    static const AuditReport r = corpus_run();
    return r;
}

const EntryReport& row(std::string_view id) {
    for (const auto& r : report().entries)
        if (r.entry_id == id) return r;
    throw std::runtime_error("no row for " + std::string(id));
}

std::string near(std::string_view what, std::optional<double> got, double want, double tol) {
    if (!got) return std::string(what) + " missing";
    if (!(std::abs(*got - want) <= tol)) return std::string(what) + " = " + fmt(*got) + ", want " + fmt(want);
    return {};
}

std::string golden_returns() {
    struct Golden {
        const char* id;
        double crash, idle, succ, tol;
    };
    const double cai_crash = -14.8 - 0.91 - 1000.0 * ((40.0 / 29.6) * (40.0 / 29.6) + 0.5);
    const Golden golden[] = {
        {"cai19", cai_crash, -120, -31.42, 0.005},     {"chen19", 601.5, -50.0, 1225.0, 0.05},
        {"dos17", 501.00, 0, 1003, 0.005},             {"ise18", -10.1, -1, 0.8, 0.05},
        {"jar18", 532980, 0, 1065960, 0.5},            {"lia18", 16900, 0, 36000, 0.5},
        {"min19", 667.125, 0, 1354.25, 0.0},           {"wan20", 174.8, -3711.2, 549.6, 0.05},
        {"tor20", 599, 25, 1200, 0.5},
    };
    for (const auto& g : golden) {
        const EntryReport& r = row(g.id);
        const double want[3] = {g.crash, g.idle, g.succ};
        const std::optional<double> got[3] = {r.g_crash, r.g_idle, r.g_succ};
        const char* names[3] = {"crash", "idle", "succ"};
        for (int k = 0; k < 3; ++k) {
            const double tol = std::max(g.tol, 1e-6 * std::abs(want[k]));
            if (auto why = near(std::string(g.id) + " G(" + names[k] + ")", got[k], want[k], tol); !why.empty())
                return why;
        }
    }
    if (auto why = near("cai19 G(crash) to printed precision", row("cai19").g_crash, -2341.86, 0.005); !why.empty())
        return why;
    const auto discrepancies = [](std::string_view id) {
        std::vector<Quantity> out;
        for (const auto& rep : row(id).reproductions)
            if (rep.status == ReproductionStatus::kDiscrepancy) out.push_back(rep.expected.quantity);
        return out;
    };
    if (discrepancies("cai19") != std::vector<Quantity>{Quantity::kGCrash}) return "cai19 -515.71 not flagged";
    if (discrepancies("min19") != std::vector<Quantity>{Quantity::kGCrash, Quantity::kGSucc})
        return "min19 stated (673.9, 1357.9) not flagged";
    if (report().reproduction_mismatches() != 0) return "unexpected reproduction mismatches";
    return {};
}

std::string preference_tally() {
    std::vector<std::string> pass, fail, other;
    for (const auto& r : report().entries) {
        switch (r.preference_status) {
            case CheckStatus::kPass: pass.push_back(r.entry_id); break;
            case CheckStatus::kFail: fail.push_back(r.entry_id); break;
            default: other.push_back(r.entry_id);
        }
    }
    if (pass != std::vector<std::string>{"cai19", "ise18"}) return "pass set differs";
    if (fail.size() != 7) return std::to_string(fail.size()) + " entries fail";
    if (other != std::vector<std::string>{"hue19"}) return "not_evaluable set differs";
    if (row("hue19").preference_status != CheckStatus::kNotEvaluable) return "hue19 status differs";
    return {};
}

std::string indifference_points() {
    if (auto why = near("cai19 p", row("cai19").p, 0.9617, 1e-4); !why.empty()) return why;
    return near("ise18 p", row("ise18").p, 0.8349, 1e-4);
}

std::string km_per_collision_values() {
    if (auto why = near("cai19 km", row("cai19").km_per_collision, 1.02, 0.01); !why.empty()) return why;
    if (auto why = near("ise18 km", row("ise18").km_per_collision, 0.11, 0.01); !why.empty()) return why;
    return near("worked example km", km_per_collision(0.25, 1.0), 0.83, 0.01);
}

std::string risk_tolerance() {
    int fails = 0;
    for (const auto& r : report().entries) {
        const CheckResult* c = r.find_check(CheckId::kRiskTolerance);
        if (r.evaluable && c->status != CheckStatus::kFail) return r.entry_id + " does not fail";
        fails += c->status == CheckStatus::kFail ? 1 : 0;
    }
    if (report().baseline_label != "drunk_teen_16_17") return "wrong baseline";
    return fails == 9 ? std::string() : std::to_string(fails) + " entries fail";
}

std::string shaping_lint_count() {
    int flagged = 0;
    for (const auto& r : report().entries) {
        const bool clean = r.find_check(CheckId::kUnsafeShaping)->status == CheckStatus::kPass;
        if (clean != (r.entry_id == "cai19" || r.entry_id == "ise18")) return r.entry_id + " misclassified";
        flagged += clean ? 0 : 1;
    }
    return flagged == 8 ? std::string() : std::to_string(flagged) + " flagged";
}

constexpr TrajectoryKind kKinds[] = {TrajectoryKind::kCrash, TrajectoryKind::kIdle, TrajectoryKind::kSucc};

std::vector<const CorpusEntry*> evaluable_entries() {
    std::vector<const CorpusEntry*> out;
    for (const auto& e : corpus_entries())
        if (e.evaluable) out.push_back(&e);
    return out;
}

std::string affine_property() {
    Gen g(1001);
    for (int i = 0; i < kPropertyCases; ++i) {
        const double a = g.uniform(-1e4, 1e4);
        const double b = a + g.uniform(1e-3, 1e3);
        const double c = b + g.uniform(1e-3, 1e3);
        const double s = g.uniform(1e-3, 1e3);
        const double d = g.uniform(-1e4, 1e4);
        const double p = indifference_point(a, b, c);
        if (std::abs(indifference_point(s * a + d, s * b + d, s * c + d) - p) > 1e-6) return "p moved at case " + std::to_string(i);
        const double x = g.uniform(-100, 100);
        const double y = g.coin(0.1) ? x : g.uniform(-100, 100);
        if (preference_check(x, y).status != preference_check(s * x, s * y).status) return "status moved";
    }
    const auto entries = evaluable_entries();
    const RiskBaseline baseline = default_baselines()[0];
    for (int i = 0; i < kPropertyCases; ++i) {
        const CorpusEntry& e = *g.pick(entries);
        if (e.id == "jar18") {  // long drives; its scaling is covered by the ratio cases above
            --i;
            continue;
        }
        const double c = g.uniform(0.01, 100.0);
        RewardSpec scaled = e.spec;
        for (auto& attr : scaled.per_step_attributes) attr.weight *= c;
        for (auto& t : scaled.terminal_rules) t.expr = Expr::binary(BinaryOp::kMul, Expr::constant(c), t.expr);
        const CanonicalAudit base = audit_canonical(e.spec, *e.scenario, baseline);
        const CanonicalAudit other = audit_canonical(scaled, *e.scenario, baseline);
        if (base.preference.status != other.preference.status) return e.id + " status moved";
        if (base.p.has_value() != other.p.has_value()) return e.id + " p appeared";
        if (base.p && std::abs(*base.p - *other.p) > 1e-9) return e.id + " p moved";
    }
    return {};
}

std::string monotone_property() {
    Gen g(1002);
    for (int i = 0; i < kPropertyCases; ++i) {
        const double a = g.uniform(-1e3, 1e3);
        const double c = a + g.uniform(1.0, 1e3);
        const double b1 = a + (c - a) * g.uniform(0.01, 0.98);
        const double b2 = b1 + (c - b1) * g.uniform(0.01, 0.99);
        const double length = g.uniform(0.01, 50.0);
        const double p1 = indifference_point(a, b1, c);
        const double p2 = indifference_point(a, b2, c);
        if (!(p1 < p2)) return "p not increasing";
        if (!(km_per_collision(p1, length) < km_per_collision(p2, length))) return "km not increasing";
    }
    return {};
}

std::string telescoping_property() {
    Gen g(1003);
    const auto entries = evaluable_entries();
    for (int i = 0; i < kPropertyCases; ++i) {
        const CorpusEntry& e = *g.pick(entries);
        if (e.id == "jar18") {
            --i;
            continue;
        }
        const Trajectory t = synth_canonical(*e.scenario, e.spec, kKinds[g.integer(0, 2)]);
        if (t.step_count() == 0) {
            --i;
            continue;
        }
        Potential phi;
        for (std::size_t s = 0; s < t.step_count(); ++s) phi[s] = g.uniform(-100, 100);
        phi[t.step_count()] = 0.0;
        const double plain = eval_return(e.spec, t).total;
        const double shaped = eval_shaped_return(e.spec, t, phi, 1.0);
        const double tol = 1e-6 * std::max({1.0, std::abs(plain), std::abs(phi[0])});
        if (std::abs(shaped - plain + phi[0]) > tol) return e.id + " shaped return does not telescope";
        std::vector<ShapingSample> samples;
        for (std::size_t s = 0; s < t.step_count(); ++s) samples.push_back({s, s + 1, phi[s + 1] - phi[s]});
        if (!potential_shaping_verify(samples, phi, 1.0, 1e-9)) return "constructed shaping rejected";
    }
    return {};
}

std::string round_trip_property() {
    Gen g(1004);
    for (int i = 0; i < kPropertyCases; ++i) {
        const RewardSpec spec = testing::random_spec(g);
        const std::string text = render_spec(spec);
        if (parse_spec(text) != spec) return "spec round-trip differs:\n" + text;
        const Expr e = testing::random_expr(g, 5, {"a", "b"});
        if (parse_expr(render_expr(e)) != e) return "expression round-trip differs: " + render_expr(e);
    }
    for (const auto& e : corpus_entries())
        if (parse_spec(render_spec(e.spec)) != e.spec) return e.id + " does not round-trip";
    return {};
}

std::string linearity_property() {
    Gen g(1005);
    const auto entries = evaluable_entries();
    for (int i = 0; i < kPropertyCases; ++i) {
        const CorpusEntry& e = *g.pick(entries);
        if (e.id == "jar18") {
            --i;
            continue;
        }
        const Trajectory t = synth_canonical(*e.scenario, e.spec, kKinds[g.integer(0, 2)]);
        RewardSpec spec = e.spec;
        spec.terminal_rules.clear();
        for (auto& a : spec.per_step_attributes) a.weight = g.nice(-10, 10, 2);
        const double base = eval_return(spec, t).total;
        const double c = g.uniform(0.01, 100.0);
        RewardSpec scaled = spec;
        for (auto& a : scaled.per_step_attributes) a.weight *= c;
        if (std::abs(eval_return(scaled, t).total - c * base) > 1e-9 * std::max(1.0, std::abs(c * base)))
            return e.id + " not homogeneous";
        double parts = 0.0;
        for (const auto& a : spec.per_step_attributes) {
            RewardSpec single = spec;
            single.per_step_attributes = {a};
            parts += eval_return(single, t).total;
        }
        if (std::abs(parts - base) > 1e-9 * std::max(1.0, std::abs(base))) return e.id + " not additive";
    }
    return {};
}

std::string shuffle_property() {
    Gen g(1006);
    const auto entries = evaluable_entries();
    std::vector<std::vector<Trajectory>> drives;
    for (const auto* e : entries) {
        drives.emplace_back();
        for (TrajectoryKind k : kKinds) drives.back().push_back(synth_canonical(*e->scenario, e->spec, k));
    }
    for (int i = 0; i < kPropertyCases; ++i) {
        const auto which = static_cast<std::size_t>(g.integer(0, static_cast<int>(entries.size()) - 1));
        const CorpusEntry& e = *entries[which];
        const Trajectory& t = drives[which][static_cast<std::size_t>(g.integer(0, 2))];
        const double before = eval_return(e.spec, t).total;
        const double after = eval_return(e.spec, testing::shuffle_events(t, *e.scenario, g)).total;
        if (std::abs(after - before) > 1e-9 * std::max(1.0, std::abs(before))) return e.id + " depends on event placement";
    }
    return {};
}

std::string property_suites() {
    const std::pair<const char*, std::string (*)()> suites[] = {
        {"affine invariance", affine_property},     {"monotone in gB", monotone_property},
        {"telescoping", telescoping_property},      {"parser round-trip", round_trip_property},
        {"evaluator linearity", linearity_property}, {"event shuffle invariance", shuffle_property},
    };
    for (const auto& [name, run] : suites) {
        if (auto why = run(); !why.empty()) return std::string(name) + ": " + why;
    }
    return {};
}

std::string figure_emission() {
    std::string runs[2];
    for (auto& text : runs) {
        std::ostringstream out, err;
        if (run_cli({"corpus", "run", "--format", "csv"}, out, err) != kExitOk) return "corpus run failed: " + err.str();
        text = out.str();
    }
    if (runs[0] != runs[1]) return "csv output differs between runs";
    std::istringstream in(runs[0]);
    std::string line;
    std::getline(in, line);
    int with_km = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream cs(line);
        for (std::string c; std::getline(cs, c, ',');) cells.push_back(c);
        if (cells.size() < 7 || cells[6].empty()) continue;
        ++with_km;
        const auto& r = row(cells[0]);
        if (!r.km_per_collision || std::abs(std::stod(cells[6]) - *r.km_per_collision) > 0.005 + 1e-12)
            return cells[0] + " km cell " + cells[6] + " does not match the audit";
    }
    if (runs[0].find("\ncai19,") == std::string::npos || runs[0].find(",1.02,true") == std::string::npos)
        return "cai19 row missing 1.02";
    if (runs[0].find(",0.8349,0.11,true") == std::string::npos) return "ise18 row missing 0.11";
    return with_km == 9 ? std::string() : std::to_string(with_km) + " rows carry km values";
}

}  // namespace

int main() {
    const std::pair<const char*, Criterion> criteria[] = {
        {"golden corpus returns", golden_returns},
        {"preference-ordering tally 2 pass / 7 fail / 1 not evaluable", preference_tally},
        {"indifference points cai19 0.9617, ise18 0.8349", indifference_points},
        {"km per collision cai19 1.02, ise18 0.11, worked example 0.83", km_per_collision_values},
        {"risk tolerance: all 9 evaluable entries fail the drunk-teen baseline", risk_tolerance},
        {"shaping lint flags 8 of 10 entries", shaping_lint_count},
        {"property suites", property_suites},
        {"figure data csv is byte-deterministic with 9 km values", figure_emission},
    };
    int failures = 0;
    int n = 0;
    for (const auto& [name, check] : criteria) {
        ++n;
        std::string why;
        try {
            why = check();
        } catch (const std::exception& e) {
            why = std::string("exception: ") + e.what();
        }
        if (why.empty()) {
            std::cout << "PASS " << n << " " << name << "\n";
        } else {
            ++failures;
            std::cout << "FAIL " << n << " " << name << ": " << why << "\n";
        }
    }
    return failures == 0 ? 0 : 1;
}
