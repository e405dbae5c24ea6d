#include "rdos/stage1.hpp"

#include "rdos/random.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace rdos {

namespace {

double view_of(const TokenDistribution& d, TokenId t, double floor)
{
    const auto p = d.prob(t);
    if (p) {
        return *p;
    }
    return d.mode == DistributionMode::TopK ? floor : 0.0;
}

/// Positions past the end of the response count as `floor` instead of failing.
double continuation_clipped(std::span<const TokenDistribution> dists, std::size_t j, std::span<const TokenId> target,
                            std::size_t m, double floor)
{
    const std::size_t terms = m < target.size() ? m + 1 : m;
    double sum = 0.0;
    for (std::size_t i = 0; i < terms; ++i) {
        const std::size_t idx = j - 1 + i;
        sum += idx < dists.size() ? view_of(dists[idx], target[i], floor) : floor;
    }
    return sum / static_cast<double>(terms);
}

TokenSeq random_suffix(Rng& rng, std::size_t length, std::size_t vocab)
{
    TokenSeq s(length);
    for (auto& t : s) {
        t = static_cast<TokenId>(1 + rng.index(vocab - 1));
    }
    return s;
}

} // namespace

void MutatorInterface::validate() const
{
    if (kind == Kind::External && endpoint.empty()) {
        throw std::invalid_argument("external mutator requires an endpoint");
    }
}

std::string_view to_string(SuffixOptimizer o) noexcept
{
    return o == SuffixOptimizer::Coordinate ? "coordinate" : "evolutionary";
}

SuffixOptimizer suffix_optimizer_from_string(std::string_view s)
{
    if (s == "coordinate") return SuffixOptimizer::Coordinate;
    if (s == "evolutionary") return SuffixOptimizer::Evolutionary;
    throw std::invalid_argument("unknown suffix optimizer: " + std::string(s));
}

std::string_view to_string(InsertionStrategy s) noexcept
{
    switch (s) {
    case InsertionStrategy::BestPosition: return "best-position";
    case InsertionStrategy::RandomPosition: return "random";
    case InsertionStrategy::FixedPrefix: return "fixed-prefix";
    }
    return "best-position";
}

InsertionStrategy insertion_strategy_from_string(std::string_view s)
{
    if (s == "best-position") return InsertionStrategy::BestPosition;
    if (s == "random") return InsertionStrategy::RandomPosition;
    if (s == "fixed-prefix") return InsertionStrategy::FixedPrefix;
    throw std::invalid_argument("unknown insertion strategy: " + std::string(s));
}

void Stage1Config::validate() const
{
    if (max_iters == 0 || target_pool == 0 || intervals == 0 || suffix_length == 0 || candidates_per_position == 0 ||
        population < 2 || patience == 0) {
        throw std::invalid_argument("stage1: counts must be positive (population >= 2)");
    }
    if (weights.alpha < 0 || weights.beta < 0 || weights.lambda < 0) {
        throw std::invalid_argument("stage1: insertion weights must be non-negative");
    }
    if (!(floor > 0.0 && floor < 1.0)) {
        throw std::invalid_argument("stage1: floor must lie in (0,1)");
    }
}

std::size_t match_len(std::span<const TokenId> z, std::size_t j, std::span<const TokenId> target)
{
    if (j < 1 || j > z.size()) {
        throw std::out_of_range("match_len: position outside response");
    }
    std::size_t m = 0;
    while (m < target.size() && j - 1 + m < z.size() && z[j - 1 + m] == target[m]) {
        ++m;
    }
    return m;
}

double continuation_prob(std::span<const TokenDistribution> dists, std::size_t j, std::span<const TokenId> target,
                         std::size_t m, double floor)
{
    if (target.empty() || m > target.size() || j < 1) {
        throw std::invalid_argument("continuation_prob: bad match length or position");
    }
    const std::size_t terms = m < target.size() ? m + 1 : m;
    if (j - 1 + terms > dists.size()) {
        throw std::out_of_range("continuation_prob: missing distribution for position " +
                                std::to_string(j - 1 + terms));
    }
    return continuation_clipped(dists, j, target, m, floor);
}

double attention_mass(const std::vector<std::vector<double>>& attention, std::size_t j, std::size_t m,
                      std::size_t suffix_begin, std::size_t suffix_end)
{
    if (m == 0) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = attention.at(j - 1 + i);
        for (std::size_t c = suffix_begin; c < suffix_end && c < row.size(); ++c) {
            sum += row[c];
        }
    }
    return sum / static_cast<double>(m);
}

double insertion_score(std::size_t m, double p, std::optional<double> a, const InsertionWeights& w,
                       std::size_t target_len)
{
    double num = w.alpha * static_cast<double>(m) + w.beta * p;
    if (a && w.lambda != 0.0) {
        num += w.lambda * *a;
    }
    return num / static_cast<double>(target_len + 1);
}

std::vector<InsertionScore> score_positions(const Response& r, std::span<const TokenId> target,
                                            const InsertionWeights& w, double floor)
{
    std::vector<InsertionScore> out;
    out.reserve(r.tokens.size());
    const bool attend = r.attention.has_value() && w.lambda != 0.0;
    for (std::size_t j = 1; j <= r.tokens.size(); ++j) {
        InsertionScore s;
        s.position = j;
        s.match = match_len(r.tokens, j, target);
        s.continuation = continuation_clipped(r.distributions, j, target, s.match, floor);
        if (attend) {
            s.attention = attention_mass(*r.attention, j, s.match, r.suffix_begin, r.suffix_end);
        }
        s.value = insertion_score(s.match, s.continuation, s.attention, w, target.size());
        out.push_back(s);
    }
    return out;
}

TargetIntent base_target(const Lexicon& lex)
{
    return {{lex.vocab.id_of("access"), lex.url}, TargetOrigin::Base, "access " + std::string(kAttackerUrl)};
}

std::vector<TargetIntent> coevolve_targets(const TargetIntent& base, std::span<const TokenDistribution> dists,
                                           std::size_t pool_size, const MutatorInterface& mutator,
                                           const Lexicon& lex)
{
    if (pool_size == 0) {
        throw std::invalid_argument("coevolve_targets: pool size must be positive");
    }
    if (base.tokens.empty()) {
        throw std::invalid_argument("coevolve_targets: empty base target");
    }
    if (mutator.kind == MutatorInterface::Kind::External) {
        std::cerr << "rdos: external mutator unreachable, using rule-based target variants\n";
    }
    std::vector<TargetIntent> pool = {base};
    if (pool_size == 1) {
        return pool;
    }

    // Intent verbs ranked by the mass the response already puts on them.
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < lex.intent_verbs.size(); ++i) {
        double best = 0.0;
        for (const auto& d : dists) {
            best = std::max(best, d.prob(lex.intent_verbs[i]).value_or(0.0));
        }
        ranked.emplace_back(best, i);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    auto add = [&](TokenSeq tokens) {
        if (pool.size() >= pool_size) {
            return;
        }
        if (std::none_of(pool.begin(), pool.end(), [&](const TargetIntent& t) { return t.tokens == tokens; })) {
            pool.push_back({tokens, TargetOrigin::Coevolved, detokenize(tokens, lex.vocab)});
        }
    };
    for (const auto& [mass, i] : ranked) {
        TokenSeq t = base.tokens;
        t.front() = lex.intent_verbs[i];
        add(std::move(t));
    }
    const TokenId now = lex.vocab.id_of("now");
    for (const auto& [mass, i] : ranked) {
        TokenSeq t = {now};
        t.insert(t.end(), base.tokens.begin(), base.tokens.end());
        t[1] = lex.intent_verbs[i];
        add(std::move(t));
    }
    return pool;
}

TargetChoice select_best_target(std::span<const TargetIntent> pool, const Response& r, const InsertionWeights& w,
                                double floor)
{
    if (pool.empty()) {
        throw std::invalid_argument("select_best_target: empty pool");
    }
    TargetChoice best;
    bool have = false;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        const auto scores = score_positions(r, pool[k].tokens, w, floor);
        if (scores.empty()) {
            continue;
        }
        const auto top = std::max_element(scores.begin(), scores.end(),
                                          [](const auto& a, const auto& b) { return a.value < b.value; });
        const bool better = !have || top->value > best.score ||
                            (top->value == best.score && top->position < best.position);
        if (better) {
            best = {k, top->position, top->value};
            have = true;
        }
    }
    return best;
}

std::vector<Interval> candidate_intervals(std::span<const InsertionScore> scores, double threshold)
{
    std::vector<Interval> out;
    for (const auto& s : scores) {
        if (s.match > 0 || s.continuation > threshold) {
            out.push_back({s.position, s.position + std::max<std::size_t>(s.match, 1) - 1, s.value});
        }
    }
    return out;
}

std::vector<Interval> select_intervals(std::span<const Interval> intervals, std::size_t limit)
{
    if (limit == 0) {
        throw std::invalid_argument("select_intervals: limit must be at least 1");
    }
    std::vector<Interval> iv(intervals.begin(), intervals.end());
    for (const auto& i : iv) {
        if (i.start > i.end) {
            throw std::invalid_argument("select_intervals: interval start after end");
        }
    }
    std::stable_sort(iv.begin(), iv.end(),
                     [](const Interval& a, const Interval& b) { return a.end != b.end ? a.end < b.end : a.start < b.start; });
    const std::size_t n = iv.size();
    // prev[i]: number of intervals (in end order) that finish before interval i starts.
    std::vector<std::size_t> prev(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t p = 0;
        while (p < i && iv[p].end < iv[i].start) {
            ++p;
        }
        prev[i] = p;
    }

    struct Cell {
        double total = 0.0;
        std::vector<std::size_t> picks; // indices into iv, ascending by end
    };
    auto starts = [&](const Cell& c) {
        std::vector<std::size_t> s;
        for (const auto i : c.picks) {
            s.push_back(iv[i].start);
        }
        std::sort(s.begin(), s.end());
        return s;
    };
    auto better = [&](const Cell& a, const Cell& b) {
        if (a.total != b.total) {
            return a.total > b.total;
        }
        return starts(a) < starts(b);
    };

    // dp[i][k]: best over the first i intervals with at most k picks.
    std::vector<std::vector<Cell>> dp(n + 1, std::vector<Cell>(limit + 1));
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t k = 1; k <= limit; ++k) {
            Cell skip = dp[i - 1][k];
            Cell take = dp[prev[i - 1]][k - 1];
            take.total += iv[i - 1].score;
            take.picks.push_back(i - 1);
            dp[i][k] = better(take, skip) ? std::move(take) : std::move(skip);
        }
    }
    std::vector<Interval> out;
    for (const auto i : dp[n][limit].picks) {
        out.push_back(iv[i]);
    }
    std::sort(out.begin(), out.end(), [](const Interval& a, const Interval& b) { return a.start < b.start; });
    return out;
}

double suffix_objective(const ResponseModel& model, const Response& r, std::span<const TokenId> suffix,
                        std::span<const TokenId> target, std::span<const std::size_t> positions, double floor)
{
    if (positions.empty()) {
        throw std::invalid_argument("suffix_objective: no positions");
    }
    double total = 0.0;
    for (const auto j : positions) {
        if (j < 1 || j > r.anchors.size()) {
            throw std::out_of_range("suffix_objective: position outside response");
        }
        total += model.target_logprob(suffix, r.anchors[j - 1], r.states[j - 1], target, floor);
    }
    return total;
}

Stage1Result optimize_suffix(const Stage1Config& config, const SyntheticAgent& agent, const Environment& env,
                             Surface surface, const TargetIntent& base, std::uint64_t seed,
                             const MutatorInterface& mutator)
{
    config.validate();
    if (base.tokens.empty()) {
        throw std::invalid_argument("optimize_suffix: empty base target");
    }
    const auto& lex = agent.lexicon();
    const std::size_t vocab = lex.vocab.size();
    const auto model = agent.model(injection_context(env, agent, surface));

    InsertionWeights weights = config.weights;
    if (!agent.access().attention_available) {
        weights.lambda = 0.0;
    }
    Rng rng(hash_keys({seed, fnv1a("stage1"), agent.seed(), static_cast<std::uint64_t>(env.kind), env.task_id}));
    Rng position_rng(hash_keys({seed, fnv1a("insertion-position")}));
    const std::uint64_t cand_key = hash_keys({seed, fnv1a("candidates"), env.task_id});

    Stage1Result result;
    auto& cand = result.candidate;
    cand.surface = surface;
    cand.target = base;
    cand.suffix = random_suffix(rng, config.suffix_length, vocab);

    std::vector<TokenSeq> population;
    if (config.optimizer == SuffixOptimizer::Evolutionary) {
        population.push_back(cand.suffix);
        while (population.size() < config.population) {
            population.push_back(random_suffix(rng, config.suffix_length, vocab));
        }
    }

    if (model.respond(cand.suffix).target_emitted) {
        cand.success = true;
        return result;
    }

    double best_objective = -std::numeric_limits<double>::infinity();
    std::size_t stall = 0;
    for (std::size_t it = 1; it <= config.max_iters; ++it) {
        const auto r = model.respond(cand.suffix);
        const auto pool = config.coevolve ? coevolve_targets(base, r.distributions, config.target_pool, mutator, lex)
                                          : std::vector<TargetIntent>{base};
        const auto choice = select_best_target(pool, r, weights, config.floor);
        const auto& target = pool[choice.index].tokens;

        std::vector<std::size_t> positions;
        std::vector<Interval> chosen;
        switch (config.insertion) {
        case InsertionStrategy::BestPosition: {
            const auto scores = score_positions(r, target, weights, config.floor);
            chosen = select_intervals(candidate_intervals(scores, config.interval_threshold), config.intervals);
            for (const auto& iv : chosen) {
                positions.push_back(iv.start);
            }
            if (positions.empty()) {
                positions.push_back(choice.position);
                chosen.push_back({choice.position, choice.position, choice.score});
            }
            break;
        }
        case InsertionStrategy::RandomPosition: {
            const std::size_t j = 1 + position_rng.index(r.tokens.size());
            positions.push_back(j);
            chosen.push_back({j, j, 0.0});
            break;
        }
        case InsertionStrategy::FixedPrefix:
            positions.push_back(1);
            chosen.push_back({1, 1, 0.0});
            break;
        }

        auto objective_of = [&](const TokenSeq& s) {
            return suffix_objective(model, r, s, target, positions, config.floor);
        };

        double objective = 0.0;
        if (config.optimizer == SuffixOptimizer::Coordinate) {
            std::vector<double> base_score(model.anchors());
            for (std::size_t a = 0; a < base_score.size(); ++a) {
                base_score[a] = model.suffix_score(a, cand.suffix);
            }
            objective = objective_of(cand.suffix);
            std::optional<std::pair<std::size_t, TokenId>> move;
            for (std::size_t pos = 0; pos < cand.suffix.size(); ++pos) {
                const TokenId old = cand.suffix[pos];
                for (std::size_t c = 0; c < config.candidates_per_position; ++c) {
                    const auto tok =
                        static_cast<TokenId>(1 + splitmix64(hash_keys({cand_key, it, pos, c})) % (vocab - 1));
                    if (tok == old) {
                        continue;
                    }
                    auto score_at = [&](std::size_t a) {
                        return base_score[a] - model.token_weight(a, old) + model.token_weight(a, tok);
                    };
                    double v = 0.0;
                    for (const auto j : positions) {
                        v += model.target_logprob(score_at, r.anchors[j - 1], r.states[j - 1], target, config.floor);
                    }
                    if (v > objective) {
                        objective = v;
                        move = {pos, tok};
                    }
                }
            }
            if (move) {
                cand.suffix[move->first] = move->second;
            }
        } else {
            std::vector<std::pair<double, std::size_t>> fitness;
            for (std::size_t i = 0; i < population.size(); ++i) {
                fitness.emplace_back(objective_of(population[i]), i);
            }
            std::stable_sort(fitness.begin(), fitness.end(),
                             [](const auto& a, const auto& b) { return a.first > b.first; });
            const std::size_t elites = std::max<std::size_t>(1, population.size() / 4);
            std::vector<TokenSeq> next;
            for (std::size_t e = 0; e < elites; ++e) {
                next.push_back(population[fitness[e].second]);
            }
            auto tournament = [&]() -> const TokenSeq& {
                std::size_t best = fitness.size();
                for (int k = 0; k < 3; ++k) {
                    best = std::min(best, rng.index(fitness.size()));
                }
                return population[fitness[best].second];
            };
            while (next.size() < population.size()) {
                const auto& a = tournament();
                const auto& b = tournament();
                TokenSeq child(a.size());
                for (std::size_t i = 0; i < child.size(); ++i) {
                    child[i] = rng.bernoulli(0.5) ? a[i] : b[i];
                }
                child[rng.index(child.size())] = static_cast<TokenId>(1 + rng.index(vocab - 1));
                if (rng.bernoulli(0.5)) {
                    child[rng.index(child.size())] = static_cast<TokenId>(1 + rng.index(vocab - 1));
                }
                next.push_back(std::move(child));
            }
            objective = fitness.front().first;
            cand.suffix = population[fitness.front().second];
            population = std::move(next);
        }

        const bool success = model.respond(cand.suffix).target_emitted;
        result.log.push_back({it, objective, success});
        cand.target = pool[choice.index];
        cand.intervals = chosen;
        cand.objective = objective;
        cand.iterations = it;
        if (success) {
            cand.success = true;
            break;
        }
        if (objective > best_objective + config.tolerance) {
            best_objective = objective;
            stall = 0;
        } else if (++stall >= config.patience && config.early_stop) {
            break;
        }
    }
    return result;
}

Stage1Result insertion_baseline(InsertionStrategy strategy, Stage1Config config, const SyntheticAgent& agent,
                                const Environment& env, Surface surface, const TargetIntent& base, std::uint64_t seed)
{
    config.insertion = strategy;
    return optimize_suffix(config, agent, env, surface, base, seed);
}

} // namespace rdos
