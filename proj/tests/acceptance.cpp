// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Tolerances and runtime limits are fixed here and nowhere else.

#include "oracles.hpp"

#include "rdos/harness.hpp"
#include "rdos/metrics.hpp"
#include "rdos/random.hpp"
#include "rdos/stage1.hpp"
#include "rdos/stage2.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace rdos;

namespace {

constexpr double kArithmeticTol = 1e-9;
constexpr double kOracleLimitSec = 10.0;
constexpr double kInsertionLimitSec = 120.0;
constexpr double kAblationLimitSec = 300.0;
constexpr std::size_t kOracleInstances = 1000;
constexpr double kBootstrapMaxWidth = 0.40;
constexpr double kBootstrapMinCoverage = 0.90;
constexpr double kLocalDecayMax = 0.60;
constexpr double kPersistentMin = 1.5;

struct Check {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ------------------------------------------------------------------ 1
Check interval_oracle()
{
    Rng rng(hash_keys({fnv1a("acceptance"), 1}));
    std::size_t exact = 0;
    for (std::size_t inst = 0; inst < kOracleInstances; ++inst) {
        const auto iv = oracle::random_intervals(rng, 12, inst);
        const std::size_t limit = 1 + inst % 3;
        double total = 0.0;
        for (const auto& p : select_intervals(iv, limit)) {
            total += p.score;
        }
        exact += total == oracle::best_interval_total(iv, limit) ? 1 : 0;
    }
    return {exact == kOracleInstances, fmt("%zu/%zu instances exact", exact, kOracleInstances)};
}

// ------------------------------------------------------------------ 2
Check insertion_arithmetic()
{
    const double r = insertion_score(1, 0.5, 0.2, {1, 1, 1}, 2);
    const bool value_ok = std::abs(r - 1.7 / 3.0) <= kArithmeticTol && std::lround(r * 1e4) == 5667;

    // lambda = 0 against attention-absent scoring on live responses
    const auto& lex = reference_lexicon();
    bool bitwise = true;
    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 30 && bitwise; ++seed) {
        const SyntheticAgent agent(seed, AgentAccess::white(), reference_params(EnvKind::WebShop));
        const auto env = make_environment(EnvKind::WebShop, seed);
        TokenSeq s;
        for (int i = 0; i < 8; ++i) {
            s.push_back(static_cast<TokenId>(1 + rng.index(lex.vocab.size() - 1)));
        }
        const auto resp = agent.respond(injection_context(env, agent, Surface::Environment), s);
        Response blind = resp;
        blind.attention.reset();
        const auto a = score_positions(resp, base_target(lex).tokens, {1, 1, 0});
        const auto b = score_positions(blind, base_target(lex).tokens, {1, 1, 1});
        for (std::size_t i = 0; i < a.size(); ++i) {
            bitwise = bitwise && a[i].value == b[i].value;
        }
    }
    return {value_ok && bitwise, fmt("r = %.10f, lambda=0 bitwise equal: %s", r, bitwise ? "yes" : "no")};
}

// ------------------------------------------------------------------ 3
Check payload_arithmetic()
{
    const std::vector<int> fid = {1, 1, 1};
    const auto s = combine_score({2, 4, 6}, fid, {1, 1, 1});
    const double stab = s_stab(std::vector<double>{4, 4, 4});
    const bool ok = std::abs(s.total - 7.0 / 3.0) <= kArithmeticTol && std::lround(s.total * 1e4) == 23333 &&
                    stab == 0.0;
    return {ok, fmt("total = %.10f, s_stab([4,4,4]) = %g", s.total, stab)};
}

// ------------------------------------------------------------------ 4
Check e2e_composition()
{
    const double a = e2e(0.95, 0.92);
    const double b = e2e(0.94, 0.90);
    const bool ok = a == 0.95 * 0.92 && b == 0.94 * 0.90 && std::lround(100 * a) == 87 && std::lround(100 * b) == 85;
    return {ok, fmt("%.4f -> %ld%%, %.4f -> %ld%%", a, std::lround(100 * a), b, std::lround(100 * b))};
}

// ------------------------------------------------------------------ 5
Check cost_arithmetic()
{
    CostLedger l;
    l.record(1'000'000, 1'000'000);
    const double c = api_cost(l);
    const auto n1 = rollout_count(25, 12, 3);
    const auto n2 = rollout_count(30, 12, 3);
    return {n1 == 900 && n2 == 1080 && c == 2.0,
            fmt("N_roll %llu / %llu, C_api %.2f", static_cast<unsigned long long>(n1),
                static_cast<unsigned long long>(n2), c)};
}

// ------------------------------------------------------------------ 6
Check insertion_ordering()
{
    const SyntheticAgent agent(7, AgentAccess::white(), reference_params(EnvKind::WebShop));
    const Stage1Config cfg;
    double rate[3];
    double iters[3];
    int k = 0;
    for (const auto strat :
         {InsertionStrategy::BestPosition, InsertionStrategy::RandomPosition, InsertionStrategy::FixedPrefix}) {
        std::vector<std::size_t> it;
        std::vector<char> ok;
        for (std::uint64_t task = 0; task < 50; ++task) {
            const auto env = make_environment(EnvKind::WebShop, task);
            for (std::uint64_t s = 0; s < 3; ++s) {
                const auto r = insertion_baseline(strat, cfg, agent, env, Surface::Environment, base_target(), s);
                it.push_back(r.candidate.iterations);
                ok.push_back(r.candidate.success ? 1 : 0);
            }
        }
        const auto flags = std::make_unique<bool[]>(ok.size());
        std::copy(ok.begin(), ok.end(), flags.get());
        rate[k] = static_cast<double>(std::count(ok.begin(), ok.end(), 1)) / static_cast<double>(ok.size());
        iters[k] = mean_iterations(it, std::span<const bool>(flags.get(), ok.size()), cfg.max_iters);
        ++k;
    }
    const bool ok = rate[0] > rate[1] && rate[1] > rate[2] && iters[0] < iters[1] && iters[1] < iters[2];
    return {ok, fmt("success %.2f > %.2f > %.2f, iters %.1f < %.1f < %.1f", rate[0], rate[1], rate[2], iters[0],
                    iters[1], iters[2])};
}

// ------------------------------------------------------------------ 7
Check ablation_ordering()
{
    const SyntheticAgent agent(7, AgentAccess::white(), reference_params(EnvKind::WebShop));
    const std::vector<ScoreWeights> objectives = {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}};
    double hit[3];
    double acc[3];
    for (std::size_t o = 0; o < objectives.size(); ++o) {
        std::size_t h = 0;
        std::size_t a = 0;
        std::size_t n = 0;
        for (std::uint64_t task = 0; task < 30; ++task) {
            const auto env = make_environment(EnvKind::WebShop, task);
            Stage2Config cfg;
            cfg.variant = Stage2Variant::IclAware;
            cfg.weights = objectives[o];
            const auto res =
                run_stage2(cfg, agent, env, Surface::Environment, seed_payloads(cfg.variant, env), task);
            for (std::uint64_t s = 0; s < 20; ++s) {
                const auto t = run_episode(agent, env, Injection{Surface::Environment, {}}, res.best, std::nullopt,
                                           hash_keys({999, task, s}), {true});
                h += t.encounter_turn ? 1 : 0;
                a += t.outcome == Outcome::Success ? 1 : 0;
                ++n;
            }
        }
        hit[o] = static_cast<double>(h) / static_cast<double>(n);
        acc[o] = static_cast<double>(a) / static_cast<double>(n);
    }
    const bool ok = hit[0] < hit[1] && hit[1] <= hit[2] && acc[2] >= acc[0];
    return {ok, fmt("Hit %.3f < %.3f <= %.3f, Acc(full) %.3f >= Acc(RTI) %.3f", hit[0], hit[1], hit[2], acc[2],
                    acc[0])};
}

ExperimentConfig reference_config()
{
    auto c = parse_config(R"({"name": "acceptance", "agent": {"seed": 7}, "environment": "webshop"})");
    return c;
}

// ------------------------------------------------------------------ 8
Check defense_monotonicity()
{
    auto cfg = reference_config();
    cfg.seeds = {0};
    cfg.sweep = SweepSpec{};
    const auto res = run_sweep(cfg);
    std::vector<const SweepPoint*> filt;
    std::vector<const SweepPoint*> mon;
    for (const auto& r : res.sweep) {
        (r.point.kind == "filter" ? filt : mon).push_back(&r.point);
    }
    bool ok = filt.size() == 5 && mon.size() == 5;
    std::string e2e_s;
    std::string acc_s;
    std::string comp_s;
    for (std::size_t i = 0; i < filt.size(); ++i) {
        if (i > 0) {
            ok = ok && filt[i]->attack_e2e <= filt[i - 1]->attack_e2e;
            ok = ok && filt[i]->benign_accuracy <= filt[i - 1]->benign_accuracy;
        }
        e2e_s += fmt("%s%.0f", i ? "/" : "", 100 * filt[i]->attack_e2e);
        acc_s += fmt("%s%.0f", i ? "/" : "", 100 * filt[i]->benign_accuracy);
    }
    for (std::size_t i = 0; i < mon.size(); ++i) {
        if (i > 0) {
            ok = ok && mon[i]->benign_completion <= mon[i - 1]->benign_completion;
        }
        comp_s += fmt("%s%.0f", i ? "/" : "", 100 * mon[i]->benign_completion);
    }
    ok = ok && !mon.empty() && std::isinf(mon[0]->value) && mon[0]->terminations == 0;
    return {ok, "theta E2E% " + e2e_s + ", benign acc% " + acc_s + "; c completion% " + comp_s +
                    fmt(", terminations at c=inf: %zu", mon.empty() ? 0 : mon[0]->terminations)};
}

// ------------------------------------------------------------------ 9
Check persistence_property()
{
    const SyntheticAgent agent(7, AgentAccess::white(), reference_params(EnvKind::WebShop));
    double min_persistent = 1e300;
    double max_decay = 0.0;
    std::size_t persistent_eps = 0;
    std::size_t local_eps = 0;
    for (std::uint64_t task = 0; task < 20; ++task) {
        const auto env = make_environment(EnvKind::WebShop, task);
        const Stage2Config cfg; // persistent variant
        const auto res = run_stage2(cfg, agent, env, Surface::Environment, seed_payloads(cfg.variant, env), task);
        Payload local = res.best;
        local.persistent_policy.clear();
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto seed = hash_keys({fnv1a("persistence"), task, s});
            const auto benign = run_episode(agent, env, std::nullopt, std::nullopt, std::nullopt, seed);
            // attacked turn t replays benign turn t-1 once past the extra fetch turn
            auto inflation = [&](const Trajectory& t, std::size_t turn) {
                return static_cast<double>(t.turns[turn - 1].reasoning_tokens) /
                       static_cast<double>(benign.turns[turn - 2].reasoning_tokens);
            };
            const auto p = run_episode(agent, env, Injection{Surface::Environment, {}}, res.best, std::nullopt,
                                       seed, {true});
            if (p.encounter_turn) {
                ++persistent_eps;
                for (std::size_t t = *p.encounter_turn; t <= p.final_turn(); ++t) {
                    min_persistent = std::min(min_persistent, inflation(p, t));
                }
            }
            const auto l =
                run_episode(agent, env, Injection{Surface::Environment, {}}, local, std::nullopt, seed, {true});
            if (l.encounter_turn && *l.encounter_turn + 2 <= l.final_turn()) {
                ++local_eps;
                const auto tau = *l.encounter_turn;
                max_decay = std::max(max_decay, inflation(l, tau + 2) / inflation(l, tau));
            }
        }
    }
    const bool ok = persistent_eps > 0 && local_eps > 0 && min_persistent > kPersistentMin && max_decay < kLocalDecayMax;
    return {ok, fmt("persistent min %.2fx over %zu episodes; local-sink max ratio(tau+2)/tau %.3f over %zu episodes",
                    min_persistent, persistent_eps, max_decay, local_eps)};
}

// ------------------------------------------------------------------ 10
Check bootstrap_protocol()
{
    std::vector<double> s(50, 1.0);
    for (std::size_t i = 0; i < 4; ++i) {
        s[i * 12] = 0.0;
    }
    const auto ci = bootstrap_ci(s, 0.95, 1000, 2024);
    const bool shape = ci.low < 0.92 && 0.92 < ci.high && ci.high - ci.low < kBootstrapMaxWidth;

    Rng rng(hash_keys({fnv1a("acceptance"), 10}));
    std::size_t covered = 0;
    constexpr std::size_t trials = 200;
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<double> x(50);
        for (auto& v : x) {
            v = rng.bernoulli(0.92) ? 1.0 : 0.0;
        }
        const auto c = bootstrap_ci(x, 0.95, 1000, t);
        covered += (c.low <= 0.92 && 0.92 <= c.high) ? 1 : 0;
    }
    const double coverage = static_cast<double>(covered) / trials;
    return {shape && coverage >= kBootstrapMinCoverage,
            fmt("CI (%.3f, %.3f) width %.3f; coverage %.3f over %zu trials", ci.low, ci.high, ci.high - ci.low,
                coverage, trials)};
}

// ------------------------------------------------------------------ 11
std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Check determinism()
{
    auto cfg = reference_config();
    cfg.tasks = 6;
    cfg.seeds = {0, 1};
    cfg.stage2->iterations = 8;
    cfg.defenses = DefenseSpec{};
    cfg.defenses->monitor_c = 3.0;
    const auto root = std::filesystem::temp_directory_path() / "rdos-acceptance";
    std::filesystem::remove_all(root);
    RunOptions a;
    a.out_dir = root / "a";
    RunOptions b;
    b.out_dir = root / "b";
    b.workers = 3;
    (void)run_experiment(cfg, a);
    (void)run_experiment(cfg, b);
    const auto ra = slurp(root / "a" / "records.jsonl");
    const auto rb = slurp(root / "b" / "records.jsonl");
    const auto ca = slurp(root / "a" / "convergence.csv");
    const auto cb = slurp(root / "b" / "convergence.csv");
    // re-export from persisted records
    const auto file = read_records(root / "a" / "records.jsonl");
    export_convergence(file.runs, root / "re.csv");
    const auto cr = slurp(root / "re.csv");
    const bool ok = !ra.empty() && ra == rb && !ca.empty() && ca == cb && ca == cr;
    std::filesystem::remove_all(root);
    return {ok, fmt("records %zu bytes identical: %s; convergence identical: %s", ra.size(), ra == rb ? "yes" : "no",
                    (ca == cb && ca == cr) ? "yes" : "no")};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Check()> run;
    double limit_sec; // 0: none
};

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {1, "interval-scheduling oracle", interval_oracle, kOracleLimitSec},
        {2, "insertion score arithmetic", insertion_arithmetic, 0},
        {3, "payload score arithmetic", payload_arithmetic, 0},
        {4, "end-to-end composition", e2e_composition, 0},
        {5, "cost arithmetic", cost_arithmetic, 0},
        {6, "insertion-strategy ordering", insertion_ordering, kInsertionLimitSec},
        {7, "scoring-term ablation ordering", ablation_ordering, kAblationLimitSec},
        {8, "defense monotonicity", defense_monotonicity, 0},
        {9, "persistence property", persistence_property, 0},
        {10, "bootstrap protocol", bootstrap_protocol, 0},
        {11, "determinism", determinism, 0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Check v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string timing = fmt("%.2fs", sec);
        if (c.limit_sec > 0) {
            timing += fmt(" < %.0fs", c.limit_sec);
            if (sec >= c.limit_sec) {
                v.pass = false;
                timing += " EXCEEDED";
            }
        }
        std::printf("[%s] %2d %s: %s (%s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(),
                    timing.c_str());
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
