#include "reward_audit/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace reward_audit {

namespace {

CompiledExpr compile_for(const Expr& expr, const FeatureSchema& schema) {
    return CompiledExpr::compile(expr, [&](std::string_view name) { return schema.slot(name); });
}

double potential_at(const Potential& phi, std::size_t index) {
    auto it = phi.find(index);
    if (it == phi.end()) {
        throw AuditError(ErrorCode::kMissingPotential, "no potential for state index " + std::to_string(index));
    }
    return it->second;
}

}  // namespace

ReturnBreakdown eval_return(const RewardSpec& spec, const Trajectory& traj, DiscountMode mode) {
    if (mode.discounted) {
        if (!spec.episode.discount) {
            throw AuditError(ErrorCode::kInvalidArgument, "discounted evaluation needs a discount in the reward spec");
        }
        if (!(mode.gamma > 0.0 && mode.gamma <= 1.0)) {
            throw AuditError(ErrorCode::kInvalidArgument, "discount must be in (0, 1]");
        }
    }

    const std::size_t n = traj.steps.size();
    const std::size_t k = spec.episode.decision_ratio();
    const auto gamma_at = [&](std::size_t step) -> long double {
        if (!mode.discounted) return 1.0L;
        return std::pow(static_cast<long double>(mode.gamma), static_cast<long double>(step / k));
    };

    ReturnBreakdown out;
    out.step_count = n;
    out.mode = mode;
    long double total = 0.0L;

    for (const auto& attr : spec.per_step_attributes) {
        const CompiledExpr f = compile_for(attr.expr, traj.schema);
        long double sum = 0.0L;
        switch (attr.accrual.mode) {
            case Accrual::Mode::kPerRewardStep:
                for (std::size_t i = 0; i < n; ++i) {
                    const auto& s = traj.steps[i];
                    sum += gamma_at(i) * s.weight * f(s.values);
                }
                break;
            case Accrual::Mode::kPerDecisionStep:
                for (std::size_t i = 0; i < n; i += k) {
                    long double block = 0.0L;
                    for (std::size_t j = i; j < std::min(n, i + k); ++j) block += traj.steps[j].weight;
                    sum += gamma_at(i) * (block / static_cast<long double>(k)) * f(traj.steps[i].values);
                }
                break;
            case Accrual::Mode::kOnEvent:
                if (traj.terminal && traj.terminal->kind == attr.accrual.event) {
                    sum += gamma_at(n == 0 ? 0 : n - 1) * f(traj.terminal->values);
                }
                break;
        }
        const long double contribution = static_cast<long double>(attr.weight) * sum;
        out.per_attribute[attr.id] += static_cast<double>(contribution);
        total += contribution;
    }

    long double terminal = 0.0L;
    if (traj.terminal) {
        for (const auto& rule : spec.terminal_rules) {
            if (rule.on != traj.terminal->kind) continue;
            terminal += gamma_at(n == 0 ? 0 : n - 1) * compile_for(rule.expr, traj.schema)(traj.terminal->values);
        }
    }
    out.terminal_contribution = static_cast<double>(terminal);
    out.total = static_cast<double>(total + terminal);
    return out;
}

double shaping_sum(const Potential& phi, std::size_t steps, double gamma) {
    long double sum = 0.0L;
    for (std::size_t t = 0; t < steps; ++t) {
        sum += static_cast<long double>(gamma) * potential_at(phi, t + 1) - potential_at(phi, t);
    }
    return static_cast<double>(sum);
}

double eval_shaped_return(const RewardSpec& spec, const Trajectory& traj, const Potential& phi, double gamma) {
    const double shaping = shaping_sum(phi, traj.steps.size(), gamma);
    return eval_return(spec, traj).total + shaping;
}

}  // namespace reward_audit
