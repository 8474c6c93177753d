#pragma once

#include "reward_audit/spec_model.hpp"
#include "reward_audit/trajectory.hpp"

#include <cstddef>
#include <map>
#include <string>

namespace reward_audit {

struct DiscountMode {
    bool discounted = false;
    double gamma = 1.0;

    static DiscountMode undiscounted() { return {}; }
    static DiscountMode discounted_by(double gamma) { return {true, gamma}; }

    friend bool operator==(const DiscountMode&, const DiscountMode&) = default;
};

struct ReturnBreakdown {
    double total = 0.0;
    /// Contribution of every per-step attribute, including on_event accruals.
    std::map<std::string, double> per_attribute;
    /// Sum of the terminal rules that fired.
    double terminal_contribution = 0.0;
    std::size_t step_count = 0;
    DiscountMode mode;
};

/// G(tau) for `spec` over `traj`. Discounted mode applies gamma once per decision step and
/// needs `spec.episode.discount`; pass DiscountMode::discounted_by(*spec.episode.discount).
/// Throws AuditError kMissingFeature, kDivisionByZero, kInvalidArgument.
ReturnBreakdown eval_return(const RewardSpec& spec, const Trajectory& traj,
                            DiscountMode mode = DiscountMode::undiscounted());

/// Potential at every state index 0..step_count (the last index is the terminal state).
using Potential = std::map<std::size_t, double>;

/// Undiscounted return plus sum over t of gamma * phi(t+1) - phi(t). Throws kMissingPotential.
double eval_shaped_return(const RewardSpec& spec, const Trajectory& traj, const Potential& phi, double gamma);

/// Sum over t in [0, steps) of gamma * phi(t+1) - phi(t).
double shaping_sum(const Potential& phi, std::size_t steps, double gamma);

}  // namespace reward_audit
