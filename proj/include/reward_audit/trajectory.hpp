#pragma once

#include "reward_audit/spec_model.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace reward_audit {

/// How often a countable event happens along a drive.
struct EventRate {
    std::string feature;
    double per_km = 0.0;        // scaled by distance driven
    double per_path = 0.0;      // count per full successful path, scaled by fraction driven
    double before_crash = 0.0;  // placed on the last step before a collision (crash drives only)

    friend bool operator==(const EventRate&, const EventRate&) = default;
};

struct AddEvent {
    std::string feature;
    std::size_t step = 0;
    double amount = 1.0;
    friend bool operator==(const AddEvent&, const AddEvent&) = default;
};

/// Removes `amount` event units, taken from the earliest steps that carry them.
struct RemoveEvent {
    std::string feature;
    double amount = 1.0;
    friend bool operator==(const RemoveEvent&, const RemoveEvent&) = default;
};

/// Sets `feature` to `value` on steps [from_step, to_step).
struct SetFeature {
    std::string feature;
    std::size_t from_step = 0;
    std::size_t to_step = 0;
    double value = 0.0;
    friend bool operator==(const SetFeature&, const SetFeature&) = default;
};

/// Inserts a loop after `after_step`: half the steps advance `progress_m`, the other half undo it.
struct InsertCircle {
    std::size_t after_step = 0;
    std::size_t steps = 2;
    double progress_m = 0.0;
    friend bool operator==(const InsertCircle&, const InsertCircle&) = default;
};

/// Overlap with the opposite-direction lane during the final `seconds` before the terminal event.
struct InjectOverlap {
    double seconds = 0.0;
    friend bool operator==(const InjectOverlap&, const InjectOverlap&) = default;
};

using TrajectoryEdit = std::variant<AddEvent, RemoveEvent, SetFeature, InsertCircle, InjectOverlap>;

enum class TrajectoryKind { kCrash, kIdle, kSucc, kCustom };

std::string_view to_string(TrajectoryKind kind);

/// Abstract scenario assumptions behind the canonical drives.
struct ScenarioSpec {
    std::string id;
    std::string source;
    int format_version = 1;
    std::optional<double> path_length_km;
    double speed_mps = 0.0;
    /// Drive time for the full path; overrides distance/speed for step counts.
    std::optional<double> success_time_s;
    std::vector<EventRate> events;
    double overlap_s = 0.0;
    std::optional<double> time_limit_s;
    std::optional<double> idle_cutoff_s;
    /// Terminal event ending the idle drive. nullopt = default (timeout or zero_speed),
    /// a contained nullopt = the idle drive ends without a terminal event.
    std::optional<std::optional<EventKind>> idle_terminal;
    double collision_damage = 1.0;
    std::map<std::string, double> constants;
    TrajectoryKind loophole_base = TrajectoryKind::kSucc;
    std::vector<std::pair<std::string, TrajectoryEdit>> loophole_edits;
    std::map<std::string, double> baselines;

    const EventRate* find_event(std::string_view feature) const;

    friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

std::vector<ValidationFinding> validate_scenario(const ScenarioSpec& scenario);

/// Slot layout shared by every step of a trajectory.
struct FeatureSchema {
    std::vector<std::string> names;
    std::vector<Unit> units;
    /// Per-step quantities (event counts, deltas) that are zero on inserted or terminal steps.
    std::vector<bool> momentary;

    std::optional<std::size_t> slot(std::string_view name) const;
    std::size_t size() const noexcept { return names.size(); }

    friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

struct TrajectoryStep {
    std::size_t t_index = 0;
    /// Fraction of a reward step this step lasts (1 except possibly the final step).
    double weight = 1.0;
    std::vector<double> values;

    friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct TerminalEvent {
    EventKind kind = EventKind::kGoal;
    std::vector<double> values;

    friend bool operator==(const TerminalEvent&, const TerminalEvent&) = default;
};

struct Trajectory {
    TrajectoryKind kind = TrajectoryKind::kCustom;
    FeatureSchema schema;
    std::vector<TrajectoryStep> steps;
    std::optional<TerminalEvent> terminal;
    double path_length_km = 0.0;
    double reward_step_s = 0.0;

    std::size_t step_count() const noexcept { return steps.size(); }
    /// Sum of step weights (exact duration in reward steps).
    double step_units() const;
    /// Duration-weighted sum of a feature over all steps.
    double feature_total(std::string_view name) const;
    FeatureEnv step_env(std::size_t step) const;
    FeatureEnv terminal_env() const;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Step-count guard for duration/step divisions, in seconds.
inline constexpr double kStepCountGuardS = 1e-9;

/// Builds the crash, idle or succ drive for `spec` under `scenario`.
/// Throws AuditError kNotEvaluable or kMissingScenarioParameter.
Trajectory synth_canonical(const ScenarioSpec& scenario, const RewardSpec& spec, TrajectoryKind kind);

/// Returns a copy of `base` with `edits` applied in order. Throws kEditOutOfRange.
Trajectory synth_custom(const Trajectory& base, const std::vector<TrajectoryEdit>& edits);

/// Idle duration in seconds, or nullopt when the idle drive is undefined.
std::optional<double> idle_duration_s(const ScenarioSpec& scenario, const RewardSpec& spec);

}  // namespace reward_audit
