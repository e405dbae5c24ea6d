#pragma once

// Efficiency-aware defenses: observation relevance filtering, runtime
// monitoring against calibrated per-turn thresholds, and hard budgets.

#include "rdos/core.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdos {

struct MonitorConfig {
    double mu = 0.0;
    double sigma = 0.0;
    double c = std::numeric_limits<double>::infinity();
};

struct Budgets {
    std::optional<std::size_t> max_reasoning_tokens;
    std::optional<std::size_t> max_tool_calls;
    std::optional<double> max_sim_time;
};

struct DefenseConfig {
    std::optional<double> filter_theta;
    std::optional<MonitorConfig> monitor;
    std::optional<Budgets> budgets;

    void validate() const;
};

struct CalibrationRecord {
    std::size_t episodes = 0;
    std::vector<std::size_t> samples;
    double mu = 0.0;
    double sigma = 0.0;
};

/// Fraction of the observation's distinct tokens that also occur in the task
/// context. An empty observation scores 1.
[[nodiscard]] double relevance_score(std::span<const TokenId> observation, std::span<const TokenId> task_context);

/// True when the observation survives the filter (score >= theta).
[[nodiscard]] bool filter_keeps(double score, double theta);

/// Returns the observation, or nullopt when it is discarded.
[[nodiscard]] std::optional<TokenSeq> apply_filter(const TokenSeq& observation, double theta,
                                                   std::span<const TokenId> task_context);

/// Fits mu and population sigma over every turn of the given benign episodes.
[[nodiscard]] CalibrationRecord calibrate_monitor(std::span<const Trajectory> benign);

enum class Verdict { Continue, Terminate };

[[nodiscard]] Verdict monitor_check(double turn_tokens, double mu, double sigma, double c);

struct RunningTotals {
    std::size_t reasoning_tokens = 0;
    std::size_t tool_calls = 0; // including the call being attempted
    double sim_time = 0.0;
};

struct BudgetVerdict {
    Verdict verdict = Verdict::Continue;
    std::string reason; // "token-budget", "tool-budget" or "time-budget"
};

/// Hard caps. A cap that is exactly met still continues.
[[nodiscard]] BudgetVerdict enforce_budget(const RunningTotals& totals, const std::optional<Budgets>& budgets);

} // namespace rdos
