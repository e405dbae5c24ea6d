#include "rdos/random.hpp"
#include "rdos/stage2.hpp"

#include <doctest.h>

#include <cmath>

using namespace rdos;

namespace {

// Trajectory whose turn t has tokens[t-1] reasoning tokens.
Trajectory with_tokens(const std::vector<std::size_t>& tokens)
{
    Trajectory t;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        Turn turn;
        turn.index = i + 1;
        turn.reasoning_tokens = tokens[i];
        t.turns.push_back(turn);
    }
    return t;
}

} // namespace

TEST_CASE("rti_turn")
{
    CHECK(rti_turn(40, 40) == 1.0);
    CHECK(rti_turn(120, 40) == 3.0);
    CHECK_THROWS((void)rti_turn(10, 0));
}

TEST_CASE("s_rti")
{
    const auto t = with_tokens({10, 30, 50, 40});
    CHECK(s_rti(t, 2, 4, 10.0) == doctest::Approx(4.0));
    CHECK(s_rti(with_tokens({10, 10, 10}), 1, 3, 10.0) == 1.0);
    CHECK(s_rti(with_tokens({10, 10, 70}), 3, 3, 10.0) == doctest::Approx(7.0));
    CHECK(s_rti(t, std::nullopt, 4, 10.0) == 1.0);
    CHECK_THROWS((void)s_rti(t, 5, 4, 10.0));
}

TEST_CASE("s_fid")
{
    Trajectory t = with_tokens({10});
    t.gold_executed = true;
    CHECK(s_fid(t) == 1);
    t.outcome = Outcome::TerminatedByDefense;
    CHECK(s_fid(t) == 0);
    t.outcome = Outcome::Success;
    t.gold_executed = false;
    CHECK(s_fid(t) == 0);
}

TEST_CASE("s_stab")
{
    CHECK(s_stab(std::vector<double>{4, 4, 4}) == 0.0);
    CHECK(s_stab(std::vector<double>{2, 4, 6}) == doctest::Approx(-8.0 / 3.0));
    CHECK(s_stab(std::vector<double>{5}) == 0.0);
    CHECK_THROWS((void)s_stab(std::vector<double>{}));

    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> v(1 + rng.index(5));
        for (auto& x : v) {
            x = 1.0 + rng.index(3);
        }
        const double s = s_stab(v);
        CHECK(s <= 0.0);
        const bool equal = std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
        CHECK((s == 0.0) == equal);
    }
}

TEST_CASE("combine_score")
{
    const std::vector<int> fid = {1, 1, 1};
    const auto flat = combine_score({4, 4, 4}, fid, {});
    CHECK(flat.total == 5.0);
    const auto spread = combine_score({2, 4, 6}, fid, {});
    CHECK(std::abs(spread.total - 2.3333333333) < 1e-9);
    CHECK(std::abs(spread.total - 7.0 / 3.0) < 1e-12);
    const auto inert = combine_score({1, 1, 1}, fid, {});
    CHECK(inert.total == 2.0);

    // majority vote
    CHECK(combine_score({1, 1, 1}, std::vector<int>{1, 1, 0}, {}).s_fid == 1);
    CHECK(combine_score({1, 1, 1}, std::vector<int>{1, 0, 0}, {}).s_fid == 0);
    CHECK(combine_score({1, 1}, std::vector<int>{1, 0}, {}).s_fid == 0);
    CHECK_THROWS((void)combine_score({1, 1}, fid, {}));
}

TEST_CASE("doubling the weights doubles every total and keeps the argmax")
{
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const ScoreWeights w{rng.uniform(), rng.uniform(), rng.uniform()};
        const ScoreWeights w2{2 * w.w1, 2 * w.w2, 2 * w.w3};
        std::size_t best1 = 0;
        std::size_t best2 = 0;
        double top1 = -1e300;
        double top2 = -1e300;
        for (std::size_t k = 0; k < 6; ++k) {
            std::vector<double> r = {1 + 5 * rng.uniform(), 1 + 5 * rng.uniform(), 1 + 5 * rng.uniform()};
            const std::vector<int> f = {static_cast<int>(rng.index(2)), 1, static_cast<int>(rng.index(2))};
            const auto a = combine_score(r, f, w);
            const auto b = combine_score(r, f, w2);
            CHECK(b.total == 2 * a.total);
            if (a.total > top1) {
                top1 = a.total;
                best1 = k;
            }
            if (b.total > top2) {
                top2 = b.total;
                best2 = k;
            }
        }
        CHECK(best1 == best2);
    }
}

TEST_CASE("seed payloads per variant")
{
    const auto env = make_environment(EnvKind::WebShop, 3);
    for (const auto v : {Stage2Variant::Agnostic, Stage2Variant::Aware, Stage2Variant::IclAgnostic,
                         Stage2Variant::IclAware, Stage2Variant::Persistent}) {
        const auto pool = seed_payloads(v, env);
        CHECK(pool.size() == 4);
        for (const auto& p : pool) {
            CHECK_NOTHROW(p.validate());
            CHECK(p.has_policy() == (v == Stage2Variant::Persistent));
        }
        CHECK(stage2_variant_from_string(to_string(v)) == v);
    }
    CHECK_FALSE(searches(Stage2Variant::Agnostic));
    CHECK(searches(Stage2Variant::IclAware));
    CHECK_THROWS((void)stage2_variant_from_string("icl"));
}

TEST_CASE("score_payload: unreached payload scores as inert")
{
    auto p = reference_params(EnvKind::WebShop);
    const SyntheticAgent agent(7, AgentAccess::white(), p);
    const auto env = make_environment(EnvKind::WebShop, 1);
    auto pay = seed_payloads(Stage2Variant::Agnostic, env)[0];
    const auto seeds = scoring_seeds(1, 3);
    CostLedger ledger;
    const auto scored = score_payload(pay, agent, env, Surface::Environment, seeds, {}, &ledger);
    CHECK(ledger.n_roll == 3);
    CHECK(scored.attacked.size() == 3);
    if (scored.score.encounters == 0) {
        CHECK(scored.score.s_rti == 1.0);
    }
    for (std::size_t i = 0; i < scored.attacked.size(); ++i) {
        if (!scored.attacked[i].encounter_turn) {
            CHECK(scored.score.per_seed_rti[i] == 1.0);
        }
    }
}

TEST_CASE("mutate_population: pure elitism leaves the population unchanged")
{
    const auto env = make_environment(EnvKind::Email, 2);
    auto pool = seed_payloads(Stage2Variant::IclAgnostic, env);
    std::uint64_t next = 100;
    const auto out = mutate_population(pool, pool.size(), pool.size(), 3, {}, std::nullopt, false, 5, next);
    REQUIRE(out.size() == pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        CHECK(out[i].id == pool[i].id);
        CHECK(out[i].local_sink == pool[i].local_sink);
        CHECK(out[i].persistent_policy == pool[i].persistent_policy);
    }
    CHECK(next == 100);
}

TEST_CASE("mutate_population: context-blend only with a context")
{
    const auto env = make_environment(EnvKind::WebShop, 6);
    const MutationContext ctx{env.task_context, env.kind};
    for (const bool aware : {false, true}) {
        auto pop = seed_payloads(aware ? Stage2Variant::IclAware : Stage2Variant::IclAgnostic, env);
        std::uint64_t next = 1000;
        std::size_t blends = 0;
        for (std::size_t g = 0; g < 100; ++g) {
            pop = mutate_population(pop, 12, 2, 3, {}, aware ? std::optional(ctx) : std::nullopt, false,
                                    hash_keys({77, g}), next);
            for (const auto& p : pop) {
                blends += p.lineage.tag == "context-blend" ? 1 : 0;
                CHECK_NOTHROW(p.validate());
            }
        }
        if (aware) {
            CHECK(blends > 0);
        } else {
            CHECK(blends == 0);
        }
    }
}

TEST_CASE("mutate_population is seed-deterministic")
{
    const auto env = make_environment(EnvKind::Os, 1);
    const auto pool = seed_payloads(Stage2Variant::Persistent, env);
    std::uint64_t n1 = 10;
    std::uint64_t n2 = 10;
    const auto a = mutate_population(pool, 12, 2, 3, {}, std::nullopt, true, 9, n1);
    const auto b = mutate_population(pool, 12, 2, 3, {}, std::nullopt, true, 9, n2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].local_sink == b[i].local_sink);
        CHECK(a[i].persistent_policy == b[i].persistent_policy);
        CHECK(a[i].lineage.tag == b[i].lineage.tag);
        CHECK(a[i].has_policy());
    }
}

TEST_CASE("run_stage2: rollout accounting and monotone best")
{
    const SyntheticAgent agent(7, AgentAccess::white(), reference_params(EnvKind::WebShop));
    const auto env = make_environment(EnvKind::WebShop, 4);
    for (const std::size_t t2 : {25u, 30u}) {
        Stage2Config cfg;
        cfg.iterations = t2;
        cfg.early_stop = false;
        cfg.variant = t2 == 25 ? Stage2Variant::Persistent : Stage2Variant::IclAware;
        const auto res = run_stage2(cfg, agent, env, Surface::Environment, seed_payloads(cfg.variant, env), 3);
        CHECK(res.ledger.n_roll == rollout_count(t2, 12, 3));
        CHECK(res.generations == t2);
        for (std::size_t g = 1; g < res.log.size(); ++g) {
            CHECK(res.log[g].best_total >= res.log[g - 1].best_total);
        }
        if (cfg.variant == Stage2Variant::Persistent) {
            CHECK(res.best.has_policy());
        }
    }
    CHECK(rollout_count(25, 12, 3) == 900);
    CHECK(rollout_count(30, 12, 3) == 1080);
}

TEST_CASE("run_stage2: early stop charges g * P * S rollouts")
{
    const SyntheticAgent agent(7, AgentAccess::white(), reference_params(EnvKind::WebShop));
    for (std::uint64_t task = 0; task < 5; ++task) {
        const auto env = make_environment(EnvKind::WebShop, task);
        Stage2Config cfg;
        const auto res = run_stage2(cfg, agent, env, Surface::Environment, seed_payloads(cfg.variant, env), task);
        CHECK(res.ledger.n_roll == res.generations * cfg.population * cfg.seeds);
        CHECK(res.generations <= cfg.iterations);
    }
}

TEST_CASE("run_stage2: fixed variants evaluate once")
{
    const SyntheticAgent agent(7, AgentAccess::white(), reference_params(EnvKind::WebShop));
    const auto env = make_environment(EnvKind::WebShop, 2);
    Stage2Config cfg;
    cfg.variant = Stage2Variant::Agnostic;
    const auto pool = seed_payloads(cfg.variant, env);
    const auto res = run_stage2(cfg, agent, env, Surface::Environment, pool, 1);
    CHECK(res.generations == 1);
    CHECK(res.ledger.n_roll == pool.size() * cfg.seeds);
    CHECK(res.best.lineage.tag == "seed");
}
