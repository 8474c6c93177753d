#include "reward_audit/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reward_audit {

namespace {

constexpr std::size_t kMaxSteps = 20'000'000;
constexpr double kKmhPerMps = 3.6;

[[noreturn]] void not_evaluable(const std::string& why) { throw AuditError(ErrorCode::kNotEvaluable, why); }

[[noreturn]] void missing_parameter(const std::string& name) {
    throw AuditError(ErrorCode::kMissingScenarioParameter, "scenario does not provide '" + name + "'");
}

[[noreturn]] void out_of_range(const std::string& why) { throw AuditError(ErrorCode::kEditOutOfRange, why); }

double fraction_of(TrajectoryKind kind) {
    switch (kind) {
        case TrajectoryKind::kCrash: return 0.5;
        case TrajectoryKind::kSucc: return 1.0;
        default: return 0.0;
    }
}

double speed_in(Unit unit, double mps, const std::string& name) {
    if (unit == Unit::kMps) return mps;
    if (unit == Unit::kKmh) return mps * kKmhPerMps;
    throw AuditError(ErrorCode::kInvalidArgument, "feature '" + name + "' must be declared in mps or kmh");
}

double distance_in(Unit unit, double meters, const std::string& name) {
    if (unit == Unit::kM) return meters;
    if (unit == Unit::kKm) return meters / 1000.0;
    throw AuditError(ErrorCode::kInvalidArgument, "feature '" + name + "' must be declared in m or km");
}

/// Number of whole steps plus the weight of a trailing partial step (0 when none).
struct StepPlan {
    std::size_t full = 0;
    double partial = 0.0;
    double exact = 0.0;

    std::size_t count() const { return full + (partial > 0.0 ? 1 : 0); }
};

StepPlan plan_steps(double duration_s, double dt) {
    StepPlan plan;
    if (duration_s <= 0.0) return plan;
    const double n = duration_s / dt;
    if (!std::isfinite(n) || n > static_cast<double>(kMaxSteps)) {
        throw AuditError(ErrorCode::kInvalidArgument, "trajectory would exceed the step limit");
    }
    const double rounded = std::round(n);
    if (std::abs(rounded * dt - duration_s) <= kStepCountGuardS) {
        plan.full = static_cast<std::size_t>(rounded);
        plan.exact = rounded;
        return plan;
    }
    plan.full = static_cast<std::size_t>(std::floor(n));
    plan.partial = n - std::floor(n);
    plan.exact = n;
    return plan;
}

struct IdlePlan {
    double duration_s;
    std::optional<EventKind> terminal;
};

std::optional<IdlePlan> idle_plan(const ScenarioSpec& scn, const RewardSpec& spec) {
    const EpisodeConfig& ep = spec.episode;
    std::optional<IdlePlan> plan;
    if (scn.time_limit_s) {
        plan = IdlePlan{*scn.time_limit_s, EventKind::kTimeout};
    } else if (ep.time_limit_s) {
        plan = IdlePlan{*ep.time_limit_s, EventKind::kTimeout};
    } else if (ep.time_limit_at_kmh) {
        if (!scn.path_length_km) missing_parameter("path_length_km");
        plan = IdlePlan{*scn.path_length_km / *ep.time_limit_at_kmh * 3600.0, EventKind::kTimeout};
    } else if (scn.idle_cutoff_s) {
        plan = IdlePlan{*scn.idle_cutoff_s, EventKind::kZeroSpeed};
    }
    if (plan && scn.idle_terminal) plan->terminal = *scn.idle_terminal;
    return plan;
}

}  // namespace

std::string_view to_string(TrajectoryKind kind) {
    switch (kind) {
        case TrajectoryKind::kCrash: return "crash";
        case TrajectoryKind::kIdle: return "idle";
        case TrajectoryKind::kSucc: return "succ";
        case TrajectoryKind::kCustom: return "custom";
    }
    return "?";
}

const EventRate* ScenarioSpec::find_event(std::string_view feature) const {
    for (const auto& e : events)
        if (e.feature == feature) return &e;
    return nullptr;
}

std::vector<ValidationFinding> validate_scenario(const ScenarioSpec& scn) {
    std::vector<ValidationFinding> out;
    const auto error = [&](FindingCode code, std::string locator, std::string message) {
        out.push_back({Severity::kError, code, std::move(locator), std::move(message)});
    };
    const auto non_negative = [&](std::optional<double> v, const char* name) {
        if (v && !(std::isfinite(*v) && *v >= 0.0)) {
            error(FindingCode::kInvalidScenarioValue, name, std::string(name) + " must be a finite value >= 0");
        }
    };

    if (!is_identifier(scn.id)) error(FindingCode::kInvalidIdentifier, "scenario", "invalid scenario id");
    if (scn.format_version != 1) error(FindingCode::kUnsupportedFormatVersion, "format_version", "only 1 is supported");
    non_negative(scn.path_length_km, "path_length_km");
    non_negative(scn.speed_mps, "speed_mps");
    non_negative(scn.overlap_s, "overlap_s");
    non_negative(scn.time_limit_s, "time_limit_s");
    non_negative(scn.idle_cutoff_s, "idle_cutoff_s");
    non_negative(scn.collision_damage, "collision_damage");
    if (scn.success_time_s && !(std::isfinite(*scn.success_time_s) && *scn.success_time_s > 0.0)) {
        error(FindingCode::kInvalidScenarioValue, "success_time_s", "success_time_s must be > 0");
    }
    for (std::size_t i = 0; i < scn.events.size(); ++i) {
        const auto& e = scn.events[i];
        const std::string loc = "event " + e.feature;
        if (!is_identifier(e.feature)) error(FindingCode::kInvalidIdentifier, loc, "invalid event feature name");
        for (std::size_t j = 0; j < i; ++j) {
            if (scn.events[j].feature == e.feature) error(FindingCode::kDuplicateFeature, loc, "duplicate event");
        }
        for (double v : {e.per_km, e.per_path, e.before_crash}) {
            if (!(std::isfinite(v) && v >= 0.0)) {
                error(FindingCode::kInvalidScenarioValue, loc, "event rates and counts must be >= 0");
                break;
            }
        }
    }
    for (const auto& [name, v] : scn.constants) {
        if (!is_identifier(name)) error(FindingCode::kInvalidIdentifier, "constants." + name, "invalid constant name");
        if (!std::isfinite(v)) error(FindingCode::kNonFiniteConstant, "constants." + name, "constant must be finite");
    }
    for (const auto& [label, km] : scn.baselines) {
        if (!(std::isfinite(km) && km > 0.0)) {
            error(FindingCode::kInvalidScenarioValue, "baselines." + label, "baseline must be finite and > 0");
        }
    }
    for (const auto& [name, edit] : scn.loophole_edits) {
        if (const auto* c = std::get_if<InsertCircle>(&edit); c && (c->steps < 2 || c->steps % 2 != 0)) {
            error(FindingCode::kInvalidScenarioValue, "edit " + name, "insert_circle needs an even number of steps >= 2");
        }
        if (const auto* s = std::get_if<SetFeature>(&edit); s && s->from_step > s->to_step) {
            error(FindingCode::kInvalidScenarioValue, "edit " + name, "set_feature needs from_step <= to_step");
        }
    }
    return out;
}

std::optional<std::size_t> FeatureSchema::slot(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return i;
    return std::nullopt;
}

double Trajectory::step_units() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.weight;
    return total;
}

double Trajectory::feature_total(std::string_view name) const {
    const auto slot = schema.slot(name);
    if (!slot) detail::throw_missing_feature(name);
    long double total = 0.0L;
    for (const auto& s : steps) total += static_cast<long double>(s.weight) * s.values[*slot];
    return static_cast<double>(total);
}

namespace {

FeatureEnv env_of(const FeatureSchema& schema, const std::vector<double>& values) {
    FeatureEnv env;
    for (std::size_t i = 0; i < schema.size(); ++i) env.emplace(schema.names[i], values[i]);
    return env;
}

}  // namespace

FeatureEnv Trajectory::step_env(std::size_t step) const {
    if (step >= steps.size()) out_of_range("step " + std::to_string(step) + " is past the end of the trajectory");
    return env_of(schema, steps[step].values);
}

FeatureEnv Trajectory::terminal_env() const {
    if (!terminal) throw AuditError(ErrorCode::kInvalidArgument, "trajectory has no terminal event");
    return env_of(schema, terminal->values);
}

std::optional<double> idle_duration_s(const ScenarioSpec& scn, const RewardSpec& spec) {
    if (auto plan = idle_plan(scn, spec)) return plan->duration_s;
    return std::nullopt;
}

Trajectory synth_canonical(const ScenarioSpec& scn, const RewardSpec& spec, TrajectoryKind kind) {
    if (kind == TrajectoryKind::kCustom) {
        throw AuditError(ErrorCode::kInvalidArgument, "custom trajectories are built with synth_custom");
    }
    const EpisodeConfig& ep = spec.episode;
    if (!ep.reward_step_s || !(*ep.reward_step_s > 0.0)) not_evaluable("spec has no reward step duration");
    const double dt = *ep.reward_step_s;

    Trajectory traj;
    traj.kind = kind;
    traj.reward_step_s = dt;
    traj.path_length_km = scn.path_length_km.value_or(0.0);

    const double fraction = fraction_of(kind);
    double duration = 0.0;
    double speed_mps = 0.0;
    std::optional<EventKind> terminal_kind;

    if (kind == TrajectoryKind::kIdle) {
        const auto plan = idle_plan(scn, spec);
        if (!plan) {
            not_evaluable(ep.episodic ? "idle drive needs a time limit or an idle cutoff"
                                      : "continuing task with no time limit or cutoff");
        }
        duration = plan->duration_s;
        terminal_kind = plan->terminal;
    } else {
        if (!ep.episodic) not_evaluable("continuing task has no goal or collision termination");
        if (!scn.path_length_km) missing_parameter("path_length_km");
        const double path_m = *scn.path_length_km * 1000.0;
        if (scn.speed_mps > 0.0) {
            speed_mps = scn.speed_mps;
        } else if (scn.success_time_s) {
            speed_mps = path_m / *scn.success_time_s;
        } else {
            missing_parameter("speed_mps");
        }
        const double full_time = scn.success_time_s ? *scn.success_time_s : path_m / speed_mps;
        duration = full_time * fraction;
        terminal_kind = kind == TrajectoryKind::kCrash ? EventKind::kCollision : EventKind::kGoal;
    }

    const StepPlan plan = plan_steps(duration, dt);
    const double traveled_m = traj.path_length_km * 1000.0 * fraction;

    // Resolve every declared feature to a per-step value.
    FeatureSchema& schema = traj.schema;
    std::vector<double> base;
    std::vector<double> terminal_values;
    enum class Role { kPlain, kDistance, kSpeedChange, kOverlap, kOverlapChange, kEvent };
    std::vector<Role> roles;
    std::vector<const EventRate*> rates;

    for (const auto& decl : spec.features) {
        const std::string& name = decl.name;
        double value = 0.0;
        double at_terminal = 0.0;
        Role role = Role::kPlain;
        const EventRate* rate = nullptr;
        bool momentary = false;
        if (name == "speed") {
            value = speed_in(decl.unit, speed_mps, name);
            at_terminal = value;
        } else if (name == "collision_speed") {
            speed_in(decl.unit, 0.0, name);
            at_terminal = terminal_kind == EventKind::kCollision ? speed_in(decl.unit, speed_mps, name) : 0.0;
        } else if (name == "collision_damage") {
            at_terminal = terminal_kind == EventKind::kCollision ? scn.collision_damage : 0.0;
        } else if (name == "distance") {
            role = Role::kDistance;
            momentary = true;
            value = plan.exact > 0.0 ? distance_in(decl.unit, traveled_m / plan.exact, name) : 0.0;
            distance_in(decl.unit, 0.0, name);
        } else if (name == "speed_change") {
            role = Role::kSpeedChange;
            momentary = true;
            speed_in(decl.unit, 0.0, name);
        } else if (name == "lane_overlap") {
            role = Role::kOverlap;
        } else if (name == "lane_overlap_change") {
            role = Role::kOverlapChange;
            momentary = true;
        } else if ((rate = scn.find_event(name)) != nullptr) {
            role = Role::kEvent;
            momentary = true;
            const double total = rate->per_km * traj.path_length_km * fraction + rate->per_path * fraction;
            value = plan.exact > 0.0 ? total / plan.exact : 0.0;
        } else if (auto it = scn.constants.find(name); it != scn.constants.end()) {
            value = it->second;
            at_terminal = value;
        } else {
            missing_parameter(name);
        }
        schema.names.push_back(name);
        schema.units.push_back(decl.unit);
        schema.momentary.push_back(momentary);
        base.push_back(value);
        terminal_values.push_back(momentary ? 0.0 : at_terminal);
        roles.push_back(role);
        rates.push_back(rate);
    }

    const std::size_t n = plan.count();
    traj.steps.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        traj.steps[i].t_index = i;
        traj.steps[i].weight = i < plan.full ? 1.0 : plan.partial;
        traj.steps[i].values = base;
    }

    const std::size_t overlap_steps =
        kind == TrajectoryKind::kCrash ? std::min(n, static_cast<std::size_t>(std::llround(scn.overlap_s / dt))) : 0;

    for (std::size_t f = 0; f < schema.size(); ++f) {
        switch (roles[f]) {
            case Role::kSpeedChange:
                if (n > 0) traj.steps[0].values[f] = speed_in(schema.units[f], speed_mps, schema.names[f]) / traj.steps[0].weight;
                break;
            case Role::kOverlap:
                for (std::size_t i = n - overlap_steps; i < n; ++i) traj.steps[i].values[f] = 1.0;
                if (overlap_steps > 0) terminal_values[f] = 1.0;
                break;
            case Role::kOverlapChange:
                if (overlap_steps > 0) traj.steps[n - overlap_steps].values[f] = 1.0;
                break;
            case Role::kEvent:
                if (kind == TrajectoryKind::kCrash && rates[f]->before_crash > 0.0) {
                    if (n == 0) missing_parameter("steps before the collision");
                    traj.steps[n - 1].values[f] += rates[f]->before_crash / traj.steps[n - 1].weight;
                }
                break;
            default: break;
        }
    }

    if (terminal_kind) traj.terminal = TerminalEvent{*terminal_kind, std::move(terminal_values)};
    return traj;
}

namespace {

std::size_t require_slot(const FeatureSchema& schema, const std::string& feature) {
    auto slot = schema.slot(feature);
    if (!slot) out_of_range("trajectory has no feature '" + feature + "'");
    return *slot;
}

void apply(Trajectory& t, const AddEvent& e) {
    const std::size_t slot = require_slot(t.schema, e.feature);
    if (e.step >= t.steps.size()) out_of_range("add_event step " + std::to_string(e.step) + " is out of range");
    auto& s = t.steps[e.step];
    s.values[slot] += e.amount / s.weight;
}

void apply(Trajectory& t, const RemoveEvent& e) {
    const std::size_t slot = require_slot(t.schema, e.feature);
    const double available = t.feature_total(e.feature);
    if (available + 1e-9 < e.amount) out_of_range("not enough '" + e.feature + "' events to remove");
    double remaining = e.amount;
    for (auto& s : t.steps) {
        if (remaining <= 0.0) break;
        const double units = s.values[slot] * s.weight;
        if (units <= 0.0) continue;
        const double take = std::min(units, remaining);
        s.values[slot] = (units - take) / s.weight;
        remaining -= take;
    }
}

void apply(Trajectory& t, const SetFeature& e) {
    const std::size_t slot = require_slot(t.schema, e.feature);
    if (e.from_step > e.to_step || e.to_step > t.steps.size()) out_of_range("set_feature step range is out of range");
    for (std::size_t i = e.from_step; i < e.to_step; ++i) t.steps[i].values[slot] = e.value;
}

void apply(Trajectory& t, const InsertCircle& e) {
    if (e.after_step >= t.steps.size()) out_of_range("insert_circle after_step is out of range");
    if (e.steps < 2 || e.steps % 2 != 0) {
        throw AuditError(ErrorCode::kInvalidArgument, "insert_circle needs an even number of steps >= 2");
    }
    const auto distance = t.schema.slot("distance");
    TrajectoryStep proto = t.steps[e.after_step];
    proto.weight = 1.0;
    for (std::size_t f = 0; f < t.schema.size(); ++f)
        if (t.schema.momentary[f]) proto.values[f] = 0.0;

    const std::size_t half = e.steps / 2;
    std::vector<TrajectoryStep> loop(e.steps, proto);
    if (distance) {
        const double per_step = distance_in(t.schema.units[*distance], e.progress_m, "distance") / static_cast<double>(half);
        for (std::size_t i = 0; i < e.steps; ++i) loop[i].values[*distance] = i < half ? per_step : -per_step;
    }
    t.steps.insert(t.steps.begin() + static_cast<std::ptrdiff_t>(e.after_step + 1), loop.begin(), loop.end());
    for (std::size_t i = 0; i < t.steps.size(); ++i) t.steps[i].t_index = i;
}

void apply(Trajectory& t, const InjectOverlap& e) {
    const std::size_t slot = require_slot(t.schema, "lane_overlap");
    if (t.steps.empty() || !(t.reward_step_s > 0.0)) out_of_range("inject_overlap needs a non-empty trajectory");
    const auto count = static_cast<std::size_t>(std::llround(e.seconds / t.reward_step_s));
    if (count > t.steps.size()) out_of_range("inject_overlap is longer than the trajectory");
    const std::size_t first = t.steps.size() - count;
    for (std::size_t i = first; i < t.steps.size(); ++i) t.steps[i].values[slot] = 1.0;
    if (count > 0) {
        if (auto change = t.schema.slot("lane_overlap_change")) t.steps[first].values[*change] = 1.0;
        if (t.terminal) t.terminal->values[slot] = 1.0;
    }
}

}  // namespace

Trajectory synth_custom(const Trajectory& base, const std::vector<TrajectoryEdit>& edits) {
    Trajectory out = base;
    out.kind = TrajectoryKind::kCustom;
    for (const auto& edit : edits) std::visit([&](const auto& e) { apply(out, e); }, edit);
    return out;
}

}  // namespace reward_audit
