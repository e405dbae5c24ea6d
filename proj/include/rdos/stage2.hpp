#pragma once

// Reasoning-payload optimization: multi-objective scoring and genetic search.

#include "rdos/metrics.hpp"
#include "rdos/payload.hpp"
#include "rdos/simenv.hpp"
#include "rdos/stage1.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdos {

struct ScoreWeights {
    double w1 = 1.0; // inflation
    double w2 = 1.0; // fidelity
    double w3 = 1.0; // stability
};

struct PayloadScore {
    double s_rti = 1.0;
    int s_fid = 0;
    double s_stab = 0.0;
    ScoreWeights weights;
    double total = 0.0;
    std::vector<double> per_seed_rti;
    std::size_t encounters = 0; // seeds on which the payload was reached
};

enum class Stage2Variant { Agnostic, Aware, IclAgnostic, IclAware, Persistent };

[[nodiscard]] std::string_view to_string(Stage2Variant v) noexcept;
[[nodiscard]] Stage2Variant stage2_variant_from_string(std::string_view s);
[[nodiscard]] bool searches(Stage2Variant v) noexcept;
[[nodiscard]] bool context_aware(Stage2Variant v) noexcept;

struct Stage2Config {
    std::size_t iterations = 25;
    std::size_t population = 12;
    std::size_t seeds = 3;
    Stage2Variant variant = Stage2Variant::Persistent;
    std::size_t elitism = 2;
    std::size_t tournament = 3;
    std::size_t early_stop_patience = 5;
    double early_stop_gain = 0.01;
    bool early_stop = true;
    ScoreWeights weights;

    void validate() const;
};

/// Attacked turn tokens over the baseline mean per-turn tokens.
[[nodiscard]] double rti_turn(double attacked_tokens, double baseline_mean);

/// Mean RTI_t over [tau, T]; 1.0 when the payload was never reached.
[[nodiscard]] double s_rti(const Trajectory& traj, std::optional<std::size_t> tau, std::size_t final_turn,
                           double baseline_mean);
[[nodiscard]] double s_rti(const Trajectory& traj, double baseline_mean);

/// 1 iff the gold action ran and the episode ended in success.
[[nodiscard]] int s_fid(const Trajectory& traj);

/// Negative population variance.
[[nodiscard]] double s_stab(std::span<const double> per_seed_rti);

/// Weighted sum over already-aggregated terms.
[[nodiscard]] PayloadScore combine_score(std::vector<double> per_seed_rti, std::span<const int> per_seed_fid,
                                         const ScoreWeights& w);

/// Mean per-turn reasoning tokens of a benign trajectory.
[[nodiscard]] double baseline_mean(const Trajectory& benign);

/// Seeds used for payload scoring on a task.
[[nodiscard]] std::vector<std::uint64_t> scoring_seeds(std::uint64_t seed, std::size_t count);

struct ScoredEpisodes {
    PayloadScore score;
    std::vector<Trajectory> attacked;
};

/// Runs one post-trigger episode per seed and aggregates the objective.
[[nodiscard]] ScoredEpisodes score_payload(const Payload& payload, const SyntheticAgent& agent,
                                           const Environment& env, Surface surface,
                                           std::span<const std::uint64_t> seeds, const ScoreWeights& w,
                                           CostLedger* ledger = nullptr);

/// Generic payload seeds: agnostic ones carry only reasoning vocabulary,
/// aware ones weave in the environment's words, persistent ones add a policy.
[[nodiscard]] std::vector<Payload> seed_payloads(Stage2Variant variant, const Environment& env,
                                                 const Lexicon& lex = reference_lexicon());

struct MutationContext {
    TokenSeq context; // C
    EnvKind kind = EnvKind::WebShop;
};

/// Elites copied, the remainder bred from tournament parents by seeded operators.
[[nodiscard]] std::vector<Payload> mutate_population(std::span<const Payload> ranked_survivors, std::size_t population,
                                                     std::size_t elitism, std::size_t tournament,
                                                     const MutatorInterface& mutator,
                                                     const std::optional<MutationContext>& context, bool force_policy,
                                                     std::uint64_t seed, std::uint64_t& next_id,
                                                     const Lexicon& lex = reference_lexicon());

struct GenerationRecord {
    std::size_t generation = 0;
    double best_total = 0.0;
    double mean_total = 0.0;
    std::uint64_t best_id = 0;
    double best_s_rti = 0.0;
    int best_s_fid = 0;
    double best_s_stab = 0.0;
};

struct Stage2Result {
    Payload best;
    PayloadScore best_score;
    std::vector<GenerationRecord> log;
    CostLedger ledger;
    std::size_t generations = 0;
};

[[nodiscard]] Stage2Result run_stage2(const Stage2Config& config, const SyntheticAgent& agent, const Environment& env,
                                      Surface surface, std::vector<Payload> initial, std::uint64_t seed,
                                      const MutatorInterface& mutator = {});

} // namespace rdos
