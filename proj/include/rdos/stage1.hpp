#pragma once

// Trigger optimization: positional insertion scoring, target co-evolution,
// cardinality-bounded interval selection and suffix search.

#include "rdos/core.hpp"
#include "rdos/simenv.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdos {

/// Source of target paraphrases (Stage I) and payload rewrites (Stage II).
struct MutatorInterface {
    enum class Kind { RuleBased, External };
    Kind kind = Kind::RuleBased;
    bool context_aware = false;
    std::string endpoint; // External only

    [[nodiscard]] bool available() const noexcept { return kind == Kind::RuleBased || !endpoint.empty(); }
    void validate() const;
};

struct InsertionWeights {
    double alpha = 1.0;
    double beta = 1.0;
    double lambda = 1.0;
};

struct InsertionScore {
    std::size_t position = 0; // 1-based response index
    std::size_t match = 0;
    double continuation = 0.0;
    std::optional<double> attention;
    double value = 0.0;
};

struct Interval {
    std::size_t start = 0;
    std::size_t end = 0;
    double score = 0.0;

    friend bool operator==(const Interval&, const Interval&) = default;
};

enum class SuffixOptimizer { Coordinate, Evolutionary };
enum class InsertionStrategy { BestPosition, RandomPosition, FixedPrefix };

[[nodiscard]] std::string_view to_string(SuffixOptimizer o) noexcept;
[[nodiscard]] SuffixOptimizer suffix_optimizer_from_string(std::string_view s);
[[nodiscard]] std::string_view to_string(InsertionStrategy s) noexcept;
[[nodiscard]] InsertionStrategy insertion_strategy_from_string(std::string_view s);

struct Stage1Config {
    std::size_t max_iters = 500;
    std::size_t target_pool = 5;
    std::size_t intervals = 3;
    InsertionWeights weights;
    SuffixOptimizer optimizer = SuffixOptimizer::Coordinate;
    InsertionStrategy insertion = InsertionStrategy::BestPosition;
    bool early_stop = true;
    bool coevolve = true;
    std::size_t suffix_length = 8;
    std::size_t candidates_per_position = 64;
    std::size_t population = 64; // evolutionary backend
    std::size_t patience = 20;
    double tolerance = 1e-4;
    double floor = 1e-6;
    double interval_threshold = 0.01;

    void validate() const;
};

struct IterationRecord {
    std::size_t iteration = 0;
    double objective = 0.0;
    bool success = false;
};

struct TriggerCandidate {
    TokenSeq suffix;
    Surface surface = Surface::Environment;
    TargetIntent target;
    std::vector<Interval> intervals;
    double objective = 0.0;
    bool success = false;
    std::size_t iterations = 0; // iterations actually run
};

struct Stage1Result {
    TriggerCandidate candidate;
    std::vector<IterationRecord> log;
};

/// Length of the longest prefix of `target` found at 1-based position j of z.
[[nodiscard]] std::size_t match_len(std::span<const TokenId> z, std::size_t j, std::span<const TokenId> target);

/// Mean probability of the m matched target tokens and the next unmatched one.
/// Top-k views contribute `floor` for tokens they omit.
[[nodiscard]] double continuation_prob(std::span<const TokenDistribution> dists, std::size_t j,
                                       std::span<const TokenId> target, std::size_t m, double floor = 1e-6);

/// Mean suffix attention mass over the m matched positions starting at j.
[[nodiscard]] double attention_mass(const std::vector<std::vector<double>>& attention, std::size_t j, std::size_t m,
                                    std::size_t suffix_begin, std::size_t suffix_end);

[[nodiscard]] double insertion_score(std::size_t m, double p, std::optional<double> a, const InsertionWeights& w,
                                     std::size_t target_len);

/// Scores every response position for one target. Attention is used only
/// when present and lambda > 0.
[[nodiscard]] std::vector<InsertionScore> score_positions(const Response& r, std::span<const TokenId> target,
                                                          const InsertionWeights& w, double floor = 1e-6);

[[nodiscard]] std::vector<TargetIntent> coevolve_targets(const TargetIntent& base,
                                                         std::span<const TokenDistribution> dists,
                                                         std::size_t pool_size, const MutatorInterface& mutator,
                                                         const Lexicon& lex = reference_lexicon());

struct TargetChoice {
    std::size_t index = 0;
    std::size_t position = 0;
    double score = 0.0;
};

/// argmax over the pool of max_j r_j; ties go to the earliest best position, then pool order.
[[nodiscard]] TargetChoice select_best_target(std::span<const TargetIntent> pool, const Response& r,
                                              const InsertionWeights& w, double floor = 1e-6);

/// Intervals [j, j+max(M_j,1)-1] for positions with M_j > 0 or P_j > threshold.
[[nodiscard]] std::vector<Interval> candidate_intervals(std::span<const InsertionScore> scores,
                                                        double threshold = 0.01);

/// Max-weight pairwise disjoint subset of at most `limit` intervals.
[[nodiscard]] std::vector<Interval> select_intervals(std::span<const Interval> intervals, std::size_t limit);

/// Sum over positions of log p(target | context, suffix, z[:j]).
[[nodiscard]] double suffix_objective(const ResponseModel& model, const Response& r, std::span<const TokenId> suffix,
                                      std::span<const TokenId> target, std::span<const std::size_t> positions,
                                      double floor = 1e-6);

/// The default target "access <u>".
[[nodiscard]] TargetIntent base_target(const Lexicon& lex = reference_lexicon());

[[nodiscard]] Stage1Result optimize_suffix(const Stage1Config& config, const SyntheticAgent& agent,
                                           const Environment& env, Surface surface, const TargetIntent& base,
                                           std::uint64_t seed, const MutatorInterface& mutator = {});

/// Same loop with the interval set replaced by one random or the first position.
[[nodiscard]] Stage1Result insertion_baseline(InsertionStrategy strategy, Stage1Config config,
                                              const SyntheticAgent& agent, const Environment& env, Surface surface,
                                              const TargetIntent& base, std::uint64_t seed);

} // namespace rdos
