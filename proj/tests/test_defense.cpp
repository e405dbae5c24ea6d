#include "rdos/defense.hpp"
#include "rdos/random.hpp"

#include <doctest.h>

#include <limits>

using namespace rdos;

TEST_CASE("relevance_score")
{
    const TokenSeq ctx = {1, 2, 3, 4};
    CHECK(relevance_score(ctx, ctx) == 1.0);
    CHECK(relevance_score(TokenSeq{7, 8}, ctx) == 0.0);
    CHECK(relevance_score(TokenSeq{1, 2, 3, 7, 8, 9}, ctx) == 0.5);
    CHECK(relevance_score(TokenSeq{}, ctx) == 1.0);
}

TEST_CASE("apply_filter boundaries")
{
    const TokenSeq ctx = {1, 2};
    const TokenSeq half = {1, 9};
    CHECK(apply_filter(TokenSeq{9}, 0.0, ctx).has_value());
    CHECK(apply_filter(half, 0.5, ctx).has_value());
    CHECK_FALSE(filter_keeps(0.4, 0.7));
    CHECK_THROWS((void)apply_filter(half, 1.5, ctx));
}

TEST_CASE("filter is monotone in theta")
{
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double score = rng.uniform();
        const double t1 = rng.uniform();
        const double t2 = rng.uniform() * t1;
        if (filter_keeps(score, t1)) {
            CHECK(filter_keeps(score, t2));
        }
    }
}

TEST_CASE("calibrate_monitor")
{
    auto traj_of = [](std::initializer_list<std::size_t> xs) {
        Trajectory t;
        std::size_t i = 0;
        for (const auto x : xs) {
            Turn turn;
            turn.index = ++i;
            turn.reasoning_tokens = x;
            t.turns.push_back(turn);
        }
        return t;
    };
    const std::vector<Trajectory> flat = {traj_of({100, 100}), traj_of({100})};
    const auto a = calibrate_monitor(flat);
    CHECK(a.mu == 100.0);
    CHECK(a.sigma == 0.0);
    const std::vector<Trajectory> two = {traj_of({80, 120})};
    const auto b = calibrate_monitor(two);
    CHECK(b.mu == 100.0);
    CHECK(b.sigma == doctest::Approx(20.0));
    const std::vector<Trajectory> one = {traj_of({5})};
    CHECK_THROWS((void)calibrate_monitor(one));
}

TEST_CASE("monitor_check")
{
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(monitor_check(1e12, 100, 20, inf) == Verdict::Continue);
    CHECK(monitor_check(141, 100, 20, 2) == Verdict::Terminate);
    CHECK(monitor_check(140, 100, 20, 2) == Verdict::Continue);

    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const double tokens = 200 * rng.uniform();
        const double c1 = 4 * rng.uniform();
        const double c2 = c1 * rng.uniform();
        if (monitor_check(tokens, 100, 20, c1) == Verdict::Terminate) {
            CHECK(monitor_check(tokens, 100, 20, c2) == Verdict::Terminate);
        }
    }
}

TEST_CASE("enforce_budget")
{
    CHECK(enforce_budget({1000000, 1000, 1e9}, std::nullopt).verdict == Verdict::Continue);
    Budgets calls;
    calls.max_tool_calls = 5;
    CHECK(enforce_budget({0, 5, 0}, calls).verdict == Verdict::Continue);
    const auto sixth = enforce_budget({0, 6, 0}, calls);
    CHECK(sixth.verdict == Verdict::Terminate);
    CHECK(sixth.reason == "tool-budget");
    Budgets tokens;
    tokens.max_reasoning_tokens = 100;
    CHECK(enforce_budget({100, 1, 0}, tokens).verdict == Verdict::Continue);
    CHECK(enforce_budget({101, 2, 0}, tokens).reason == "token-budget");
}
