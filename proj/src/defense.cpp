#include "rdos/defense.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace rdos {

void DefenseConfig::validate() const
{
    if (filter_theta && !(*filter_theta >= 0.0 && *filter_theta <= 1.0)) {
        throw std::invalid_argument("filter_theta must lie in [0,1]");
    }
    if (monitor) {
        if (!(monitor->sigma >= 0.0)) {
            throw std::invalid_argument("monitor sigma must be non-negative");
        }
        if (!(monitor->c > 0.0)) {
            throw std::invalid_argument("monitor c must be positive");
        }
    }
}

double relevance_score(std::span<const TokenId> observation, std::span<const TokenId> task_context)
{
    const std::unordered_set<TokenId> obs(observation.begin(), observation.end());
    if (obs.empty()) {
        return 1.0;
    }
    const std::unordered_set<TokenId> ctx(task_context.begin(), task_context.end());
    const auto shared = std::count_if(obs.begin(), obs.end(), [&](TokenId t) { return ctx.contains(t); });
    return static_cast<double>(shared) / static_cast<double>(obs.size());
}

bool filter_keeps(double score, double theta)
{
    return !(score < theta);
}

std::optional<TokenSeq> apply_filter(const TokenSeq& observation, double theta, std::span<const TokenId> task_context)
{
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw std::invalid_argument("apply_filter: theta outside [0,1]");
    }
    if (filter_keeps(relevance_score(observation, task_context), theta)) {
        return observation;
    }
    return std::nullopt;
}

CalibrationRecord calibrate_monitor(std::span<const Trajectory> benign)
{
    CalibrationRecord rec;
    rec.episodes = benign.size();
    for (const auto& traj : benign) {
        for (const auto& t : traj.turns) {
            rec.samples.push_back(t.reasoning_tokens);
        }
    }
    if (rec.samples.size() < 2) {
        throw std::invalid_argument("calibrate_monitor: need at least two benign turns");
    }
    double sum = 0.0;
    for (const auto s : rec.samples) {
        sum += static_cast<double>(s);
    }
    const double n = static_cast<double>(rec.samples.size());
    rec.mu = sum / n;
    double ss = 0.0;
    for (const auto s : rec.samples) {
        const double d = static_cast<double>(s) - rec.mu;
        ss += d * d;
    }
    rec.sigma = std::sqrt(ss / n);
    return rec;
}

Verdict monitor_check(double turn_tokens, double mu, double sigma, double c)
{
    if (std::isinf(c)) {
        return Verdict::Continue;
    }
    return turn_tokens > mu + c * sigma ? Verdict::Terminate : Verdict::Continue;
}

BudgetVerdict enforce_budget(const RunningTotals& totals, const std::optional<Budgets>& budgets)
{
    if (!budgets) {
        return {};
    }
    if (budgets->max_reasoning_tokens && totals.reasoning_tokens > *budgets->max_reasoning_tokens) {
        return {Verdict::Terminate, "token-budget"};
    }
    if (budgets->max_tool_calls && totals.tool_calls > *budgets->max_tool_calls) {
        return {Verdict::Terminate, "tool-budget"};
    }
    if (budgets->max_sim_time && totals.sim_time > *budgets->max_sim_time) {
        return {Verdict::Terminate, "time-budget"};
    }
    return {};
}

} // namespace rdos
