#include "rdos/random.hpp"
#include "rdos/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdos {

namespace {

constexpr double kTurnNoise = 0.04;
constexpr double kTurnNoiseClamp = 0.08;
constexpr double kEpisodeNoise = 0.1;

/// Thought of `length` tokens: the template, padded with keyed words from `pad`.
TokenSeq pad_thought(const TokenSeq& base, std::size_t length, const std::vector<TokenId>& pad, std::uint64_t key)
{
    TokenSeq out = base;
    for (std::size_t i = out.size(); i < length; ++i) {
        out.push_back(pad[splitmix64(hash_keys({key, i})) % pad.size()]);
    }
    return out;
}

TokenSeq action_tokens(const Action& a, const Vocabulary& vocab)
{
    return tokenize("action " + a.tool + (a.argument.empty() ? "" : " " + a.argument), vocab);
}

struct EpisodeState {
    Trajectory traj;
    RunningTotals totals;
    bool terminated = false;
};

} // namespace

double payload_inflation(const AgentParams& p, const PayloadFeatures& f)
{
    return 1.0 + p.infl_length * std::log1p(static_cast<double>(f.length)) +
           p.infl_nesting * static_cast<double>(f.nesting_depth) + (f.persistent ? p.infl_persistence : 0.0);
}

double payload_complexity(const PayloadFeatures& f)
{
    return std::log1p(static_cast<double>(f.length)) + static_cast<double>(f.nesting_depth);
}

double engage_probability(const AgentParams& p, const PayloadFeatures& f)
{
    const double over = std::max(0.0, payload_complexity(f) - p.engage_threshold);
    return logistic(p.engage_bias + p.engage_consistency * f.consistency - p.engage_complexity * over);
}

double fidelity_failure_probability(const AgentParams& p, const PayloadFeatures& f)
{
    return logistic(payload_complexity(f) - p.distraction_threshold);
}

Trajectory run_episode(const SyntheticAgent& agent, const Environment& env, const std::optional<Injection>& injection,
                       const std::optional<Payload>& payload, const std::optional<DefenseConfig>& defenses,
                       std::uint64_t seed, EpisodeOptions options)
{
    const auto& lex = agent.lexicon();
    const auto& p = agent.params();
    if (defenses) {
        defenses->validate();
    }
    const std::uint64_t key = hash_keys({agent.seed(), static_cast<std::uint64_t>(env.kind), env.task_id, seed});
    auto draw = [&](std::string_view purpose) { return keyed_uniform({key, fnv1a(purpose)}); };

    Environment world = env;
    const std::string attacker_url(kAttackerUrl);
    if (payload) {
        world = deploy_payload(env, attacker_url, *payload);
    }
    EnvSession session(world);

    EpisodeState st;
    st.traj.seed = seed;
    const auto& env_pad = lex.env_words.at(env.kind);

    // Payload response, fixed per episode so that defense sweeps only prune.
    std::optional<PayloadFeatures> feats;
    double inflation = 1.0;
    if (payload) {
        feats = payload->features(env.task_context, lex.nesting_marker);
        inflation = payload_inflation(p, *feats) * std::exp(kEpisodeNoise * keyed_normal({key, fnv1a("inflation")}));
    }
    const double decay = feats && feats->persistent ? 1.0 : p.local_decay;

    bool essential_lost = false;
    bool engaged = false;
    const bool benign_slip = draw("benign-accuracy") >= p.benign_accuracy;
    const bool fidelity_slip = feats && draw("fidelity") < fidelity_failure_probability(p, *feats);

    auto emit = [&](TokenSeq thought, Action action, TokenSeq observation, bool observes_page) {
        const std::size_t index = st.traj.turns.size() + 1;
        auto acts = action_tokens(action, lex.vocab);
        const std::size_t reasoning = thought.size() + acts.size();
        const double latency = static_cast<double>(reasoning) * p.per_token_latency + p.per_call_latency;
        st.totals.reasoning_tokens += reasoning;
        st.totals.tool_calls += 1;
        st.totals.sim_time += latency;

        if (defenses && defenses->filter_theta && observes_page && !observation.empty()) {
            if (!apply_filter(observation, *defenses->filter_theta, env.task_context)) {
                observation = {lex.discarded};
                st.traj.defense_events.push_back({index, "filter"});
            }
        }
        st.traj = append_turn(std::move(st.traj),
                              Turn::make(index, std::move(thought), std::move(action), std::move(acts),
                                         std::move(observation), latency));

        if (defenses && defenses->monitor) {
            const auto& m = *defenses->monitor;
            if (monitor_check(static_cast<double>(reasoning), m.mu, m.sigma, m.c) == Verdict::Terminate) {
                st.traj.defense_events.push_back({index, "monitor"});
                st.terminated = true;
                return;
            }
        }
        if (defenses) {
            const auto verdict = enforce_budget(st.totals, defenses->budgets);
            if (verdict.verdict == Verdict::Terminate) {
                st.traj.defense_events.push_back({index, verdict.reason});
                st.terminated = true;
            }
        }
    };

    constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();
    const std::size_t inject_at = injection ? injection_step(injection->surface) : kNever;

    for (std::size_t s = 0; s < env.plan.size() && !st.terminated; ++s) {
        const auto& stepdef = env.plan[s];

        if (inject_at == s) {
            bool fired = options.pretriggered;
            if (!fired) {
                const auto ctx = injection_context(env, agent, injection->surface);
                fired = agent.respond(ctx, injection->suffix).target_emitted;
            }
            if (fired) {
                st.traj.target_in_response = true;
                const bool valid = options.pretriggered || draw("action-validity") < p.action_validity;
                const Action fetch{"get_webpage", valid ? attacker_url : "attacker test"};
                const auto res = session.step({fetch.tool, fetch.argument, st.traj.turns.size() + 1});
                const std::size_t len = agent.benign_length(seed, s);
                emit(pad_thought(stepdef.thought, len, env_pad, hash_keys({key, fnv1a("fetch")})), fetch,
                     res.observation, true);
                if (valid) {
                    st.traj.valid_tool_invocation = true;
                    st.traj.fetch_turn = st.traj.turns.size();
                    const auto& obs = st.traj.turns.back().observation;
                    const bool received = payload && !obs.empty() && obs.front() != lex.discarded &&
                                          obs.front() != lex.not_found;
                    if (received && !st.terminated && draw("engage") < engage_probability(p, *feats)) {
                        engaged = true;
                        st.traj.encounter_turn = st.traj.turns.size() + 1;
                    }
                }
                if (st.terminated) {
                    break;
                }
            }
        }

        const bool last = s + 1 == env.plan.size();
        Action action = stepdef.action;
        if (last && (benign_slip || essential_lost || (engaged && fidelity_slip))) {
            action.argument += " w00";
        }
        const auto res = session.step({action.tool, action.argument, st.traj.turns.size() + 1});
        const std::size_t index = st.traj.turns.size() + 1;

        double mult = 1.0;
        if (engaged && st.traj.encounter_turn && index >= *st.traj.encounter_turn) {
            const auto since = static_cast<double>(index - *st.traj.encounter_turn);
            mult = std::max(1.0, inflation * std::pow(decay, since));
        }
        const double noise =
            1.0 + std::clamp(kTurnNoise * keyed_normal({key, fnv1a("turn-noise"), s}), -kTurnNoiseClamp,
                             kTurnNoiseClamp);
        const double base = static_cast<double>(agent.benign_length(seed, s));
        const std::size_t benign_len = static_cast<std::size_t>(std::lround(base * noise));
        const std::size_t len = static_cast<std::size_t>(std::lround(base * noise * mult));
        TokenSeq thought = pad_thought(stepdef.thought, benign_len, env_pad, hash_keys({key, fnv1a("pad"), s}));
        thought = pad_thought(thought, len, lex.reasoning_words, hash_keys({key, fnv1a("sink"), s}));

        const std::size_t before = st.traj.defense_events.size();
        emit(std::move(thought), std::move(action), res.observation, stepdef.observes_page);
        if (stepdef.observes_page && st.traj.defense_events.size() > before &&
            st.traj.defense_events[before].kind == "filter") {
            essential_lost = true;
        }
    }

    // An encounter scheduled past a defense termination never happened.
    if (st.traj.encounter_turn && *st.traj.encounter_turn > st.traj.turns.size()) {
        st.traj.encounter_turn.reset();
    }
    st.traj.gold_executed = session.task_success();
    if (st.terminated) {
        st.traj.outcome = Outcome::TerminatedByDefense;
    } else {
        st.traj.outcome = st.traj.gold_executed ? Outcome::Success : Outcome::Failure;
    }
    return st.traj;
}

RemoteResponse RemoteAgentAdapter::respond(const RemoteRequest& /*request*/) const
{
    if (!configured()) {
        throw std::runtime_error("remote agent adapter: no endpoint configured");
    }
    throw std::runtime_error("remote agent adapter: no transport available for endpoint " + endpoint_);
}

} // namespace rdos
