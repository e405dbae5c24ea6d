#pragma once

// Attack metrics, the API cost model and percentile bootstrap intervals.

#include "rdos/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdos {

struct Pricing {
    std::string model = "default";
    double input_per_million = 0.50;
    double output_per_million = 1.50;
};

struct ApiCall {
    std::uint64_t t_in = 0;
    std::uint64_t t_out = 0;
};

struct CostLedger {
    std::vector<ApiCall> calls;
    Pricing pricing;
    std::uint64_t n_roll = 0;
    double h_gpu = 0.0; // recorded, never computed
    std::uint64_t optimizer_tokens = 0;
    std::uint64_t rollout_tokens = 0;

    [[nodiscard]] std::size_t n_api() const noexcept { return calls.size(); }
    [[nodiscard]] std::uint64_t input_tokens() const noexcept;
    [[nodiscard]] std::uint64_t output_tokens() const noexcept;
    void record(std::uint64_t t_in, std::uint64_t t_out);
    /// One call per turn: input is the visible context so far, output the turn's reasoning tokens.
    void record_episode(const Trajectory& traj, std::size_t prompt_tokens);
    void merge(const CostLedger& other);
};

/// Sum of c_in * t_in + c_out * t_out over all calls, in currency units.
[[nodiscard]] double api_cost(const CostLedger& ledger);

[[nodiscard]] std::uint64_t rollout_count(std::uint64_t t2, std::uint64_t population, std::uint64_t seeds);

struct AsrRates {
    double asr_s = 0.0;
    double asr_h = 0.0;
};

[[nodiscard]] AsrRates compute_asr(std::span<const Trajectory> runs);

struct Slowdown {
    double rti = 1.0;
    double delay = 0.0;
    double delay_ratio = 1.0;
    double hit = 0.0;
    double accuracy = 0.0;
};

/// Attacked runs against their benign baselines (paired by index).
[[nodiscard]] Slowdown compute_slowdown(std::span<const Trajectory> attacked, std::span<const Trajectory> benign);

[[nodiscard]] double e2e(double asr_h, double hit);

struct ConfidenceInterval {
    double point = 0.0;
    double low = 0.0;
    double high = 0.0;
    double level = 0.95;
    std::size_t resamples = 1000;
};

/// Percentile bootstrap of the sample mean.
[[nodiscard]] ConfidenceInterval bootstrap_ci(std::span<const double> samples, double level = 0.95,
                                              std::size_t resamples = 1000, std::uint64_t seed = 0);

/// Mean Stage I iteration count; failures count at `max_iters` unless excluded.
[[nodiscard]] double mean_iterations(std::span<const std::size_t> iterations, std::span<const bool> success,
                                     std::size_t max_iters, bool exclude_failed = false);

struct MetricsReport {
    double asr_s = 0.0;
    double asr_h = 0.0;
    double hit = 0.0;
    double accuracy = 0.0;
    double rti = 1.0;
    double delay = 0.0;
    double iters = 0.0;
    double e2e = 0.0;
    std::size_t n = 0;
    std::optional<ConfidenceInterval> asr_h_ci;
    std::optional<ConfidenceInterval> hit_ci;
    std::optional<ConfidenceInterval> accuracy_ci;

    void validate() const;
};

} // namespace rdos
