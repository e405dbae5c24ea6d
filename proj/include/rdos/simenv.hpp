#pragma once

// Seeded synthetic agents and three environment analogs.
//
// The agent is a small analytic language model: at every response position
// the probability mass it puts on a tool-access intent is a logistic function
// of the suffix's token-count vector dotted with a hidden affinity vector.
// Everything is keyed on seeds so that runs are reproducible bit for bit.

#include "rdos/core.hpp"
#include "rdos/defense.hpp"
#include "rdos/payload.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rdos {

enum class EnvKind { WebShop, Email, Os };
enum class Surface { Instruction, Environment };
enum class ArgKind { Url, Text, None };

[[nodiscard]] std::string_view to_string(EnvKind k) noexcept;
[[nodiscard]] EnvKind env_kind_from_string(std::string_view s);
[[nodiscard]] std::string_view to_string(Surface s) noexcept;
[[nodiscard]] Surface surface_from_string(std::string_view s);

inline constexpr std::string_view kAttackerUrl = "attacker.test";
inline constexpr std::string_view kNestingMarker = "recursively";

/// Harness-wide token table plus the word classes the simulator needs.
struct Lexicon {
    Vocabulary vocab;
    std::vector<TokenId> intent_verbs; // "access" first
    TokenId url = kUnkId;
    TokenId nesting_marker = kUnkId;
    std::vector<TokenId> reasoning_words;
    std::vector<TokenId> policy_words;
    std::map<EnvKind, std::vector<TokenId>> env_words;
    std::vector<TokenId> filler_words;
    TokenId not_found = kUnkId;
    TokenId discarded = kUnkId;
    TokenId invalid = kUnkId;

    [[nodiscard]] bool is_intent_verb(TokenId t) const noexcept;
};

/// The shared reference lexicon (built once, immutable).
[[nodiscard]] const Lexicon& reference_lexicon();

struct PlanStep {
    Action action;
    TokenSeq thought;  // template thought; padded with filler at run time
    bool observes_page = false;
};

struct Environment {
    EnvKind kind = EnvKind::WebShop;
    std::uint64_t task_id = 0;
    std::map<std::string, ArgKind> tools;
    std::map<std::string, TokenSeq> pages;
    std::map<std::string, TokenSeq> tool_outputs; // observation per non-browsing tool
    std::set<std::string> benign_urls;
    Surface injection_surface = Surface::Environment;
    Action gold_action;
    TokenSeq instruction;  // user instruction x
    TokenSeq task_context; // vocabulary the task legitimately uses
    std::vector<PlanStep> plan;
    double essential_relevance = 1.0; // relevance of the page the task depends on
};

/// Builds task instance `task_id` of the given kind.
[[nodiscard]] Environment make_environment(EnvKind kind, std::uint64_t task_id,
                                           Surface surface = Surface::Environment);

struct ToolCallEvent {
    std::string tool;
    std::string argument;
    std::size_t turn = 0;
};

struct StepResult {
    TokenSeq observation;
    bool valid = true;
    bool task_success = false;
};

/// Per-episode environment state over an immutable Environment.
class EnvSession {
public:
    explicit EnvSession(const Environment& env) : env_(&env) {}
    StepResult step(const ToolCallEvent& action);
    [[nodiscard]] bool task_success() const noexcept { return success_; }
    [[nodiscard]] std::size_t invalid_actions() const noexcept { return invalid_; }

private:
    const Environment* env_;
    bool success_ = false;
    std::size_t invalid_ = 0;
};

/// Single-call convenience over EnvSession.
[[nodiscard]] StepResult step(const Environment& env, const ToolCallEvent& action);

/// Returns a copy of `env` with pages[u] set to the rendered payload.
[[nodiscard]] Environment deploy_payload(const Environment& env, const std::string& u, const Payload& payload);

struct AgentParams {
    double susceptibility = 0.9;
    double base_reasoning = 40.0;
    double distraction_threshold = 7.0;
    double benign_accuracy = 0.96;
    double action_validity = 0.92;
    // trigger landscape
    double affinity_scale = 0.12;
    double position_spread = 0.6;
    double hijack_offset = 1.0;
    double continuation_bonus = 1.0;
    double resistance_max = 1.5;
    double environment_surface_bonus = 0.2;
    // payload response
    double infl_length = 1.5;
    double infl_nesting = 1.2;
    double infl_persistence = 2.5;
    double local_decay = 0.7;
    double engage_bias = 1.0;
    double engage_consistency = 3.0;
    double engage_complexity = 1.2;
    double engage_threshold = 6.0;
    std::size_t context_cap = 2048;
    // simulated latency
    double per_token_latency = 0.1;
    double per_call_latency = 1.2;

    void validate() const;
};

/// Reference parameter set for an environment kind. Susceptibility is ordered
/// webshop >= email >= os.
[[nodiscard]] AgentParams reference_params(EnvKind kind);

/// Injection context for the turn that carries the adversarial suffix.
struct ResponseContext {
    TokenSeq history;         // everything before the suffix
    TokenSeq trailing;        // context after the suffix (may be empty)
    TokenSeq benign_response; // what the agent says at this turn without attack
    Surface surface = Surface::Environment;
    std::uint64_t task_key = 0;
    double resistance = 0.0;
};

/// Decoder state of a slot: whether the previous emitted token was an intent verb.
enum class SlotState : std::uint8_t { Normal, AfterIntent };

struct Response {
    TokenSeq tokens;
    std::vector<TokenDistribution> distributions;
    /// Row per response position; columns span the full context
    /// (history, suffix, trailing). Present only in white mode.
    std::optional<std::vector<std::vector<double>>> attention;
    std::size_t suffix_begin = 0;
    std::size_t suffix_end = 0;
    bool target_emitted = false; // intent verb immediately followed by the url
    double trigger_mass = 0.5;   // reference-landscape trigger probability
    // decoder bookkeeping, one per response position
    std::vector<std::size_t> anchors;
    std::vector<SlotState> states;
};

class SyntheticAgent;

/// Per-context response model. Everything that does not depend on the suffix
/// is precomputed so that suffix search can evaluate candidates cheaply.
class ResponseModel {
public:
    ResponseModel(const SyntheticAgent& agent, ResponseContext ctx);

    [[nodiscard]] std::size_t anchors() const noexcept { return ctx_.benign_response.size(); }
    [[nodiscard]] const ResponseContext& context() const noexcept { return ctx_; }

    /// Position-specific suffix score at an anchor.
    [[nodiscard]] double suffix_score(std::size_t anchor, std::span<const TokenId> suffix) const;
    /// Contribution of one suffix token to suffix_score at an anchor.
    [[nodiscard]] double token_weight(std::size_t anchor, TokenId token) const
    {
        return weights_[anchor * vocab_size_ + token];
    }
    [[nodiscard]] double alignment(std::size_t anchor) const { return align_[anchor]; }

    /// Mass of the hijacking token(s) at a slot given the suffix score there.
    [[nodiscard]] double hijack_mass(std::size_t anchor, SlotState state, double score) const;
    /// Probability of `token` at a slot (full distribution).
    [[nodiscard]] double prob(std::size_t anchor, SlotState state, double score, TokenId token) const;
    /// Full or top-k distribution at a slot, per the agent's access mode.
    [[nodiscard]] TokenDistribution distribution(std::size_t anchor, SlotState state, double score,
                                                 std::size_t position) const;
    /// Probability of `token` as seen through the agent's access mode. Black
    /// mode reads the top-k view and returns `floor` for absent tokens.
    [[nodiscard]] double view_prob(std::size_t anchor, SlotState state, double score, TokenId token,
                                   double floor) const;

    /// log p(target | context, suffix, z[:j]) where response position j maps
    /// to (anchor, state). `score_at(anchor)` supplies the suffix score, so
    /// callers can evaluate candidate suffixes incrementally.
    template <class ScoreAt>
    [[nodiscard]] double target_logprob(ScoreAt&& score_at, std::size_t anchor, SlotState state,
                                        std::span<const TokenId> target, double floor) const
    {
        double lp = 0.0;
        for (const TokenId tok : target) {
            double p = floor;
            if (anchor < anchors()) {
                p = view_prob(anchor, state, score_at(anchor), tok, floor);
            }
            lp += std::log(std::max(p, floor));
            if (anchor < anchors() && tok == ctx_.benign_response[anchor]) {
                ++anchor;
            }
            state = is_intent(tok) ? SlotState::AfterIntent : SlotState::Normal;
        }
        return lp;
    }

    [[nodiscard]] double target_logprob(std::span<const TokenId> suffix, std::size_t anchor, SlotState state,
                                        std::span<const TokenId> target, double floor) const
    {
        return target_logprob([&](std::size_t a) { return suffix_score(a, suffix); }, anchor, state, target,
                              floor);
    }

    /// Greedy decode for a given suffix.
    [[nodiscard]] Response respond(std::span<const TokenId> suffix) const;

private:
    [[nodiscard]] bool is_intent(TokenId t) const noexcept;
    [[nodiscard]] std::vector<std::pair<TokenId, double>> head(std::size_t anchor, SlotState state,
                                                               double score) const;

    const SyntheticAgent* agent_;
    ResponseContext ctx_;
    std::size_t vocab_size_;
    std::vector<double> weights_; // anchors x vocab
    std::vector<double> align_;
    std::vector<std::array<TokenId, 3>> alternatives_;
};

class SyntheticAgent {
public:
    SyntheticAgent(std::uint64_t seed, AgentAccess access, AgentParams params,
                   const Lexicon& lex = reference_lexicon());

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] const AgentAccess& access() const noexcept { return access_; }
    [[nodiscard]] const AgentParams& params() const noexcept { return params_; }
    [[nodiscard]] const Lexicon& lexicon() const noexcept { return *lex_; }
    [[nodiscard]] const std::vector<double>& affinity() const noexcept { return affinity_; }
    /// Softmax weights over intent verbs (same order as Lexicon::intent_verbs).
    [[nodiscard]] const std::vector<double>& intent_weights() const noexcept { return intent_weights_; }
    [[nodiscard]] double intent_weight(TokenId verb) const;

    /// logistic(susceptibility * <count(suffix), affinity>).
    [[nodiscard]] double trigger_probability(std::span<const TokenId> suffix) const;

    /// Builds a response model; throws std::length_error when the context
    /// exceeds the configured cap.
    [[nodiscard]] ResponseModel model(ResponseContext ctx) const;
    [[nodiscard]] Response respond(const ResponseContext& ctx, std::span<const TokenId> suffix) const;

    /// Benign thought length at plan step `step` for episode seed `seed`.
    [[nodiscard]] std::size_t benign_length(std::uint64_t episode_seed, std::size_t step) const;

private:
    std::uint64_t seed_;
    AgentAccess access_;
    AgentParams params_;
    const Lexicon* lex_;
    std::vector<double> affinity_;
    std::vector<double> intent_weights_;
};

/// Keeps the first 25% and the last 75% of the budget.
[[nodiscard]] TokenSeq truncate_context(const TokenSeq& tokens, std::size_t cap);

/// Builds the injection context for an environment.
[[nodiscard]] ResponseContext injection_context(const Environment& env, const SyntheticAgent& agent,
                                                Surface surface);

/// Plan step at which the suffix is seen.
[[nodiscard]] std::size_t injection_step(Surface surface) noexcept;

struct Injection {
    Surface surface = Surface::Environment;
    TokenSeq suffix;
};

struct EpisodeOptions {
    /// Stage II evaluation: the trigger is taken as validated and the fetch
    /// happens at the injection step without decoding.
    bool pretriggered = false;
};

/// Runs the ReAct loop to completion, defense termination, or plan end.
[[nodiscard]] Trajectory run_episode(const SyntheticAgent& agent, const Environment& env,
                                     const std::optional<Injection>& injection,
                                     const std::optional<Payload>& payload,
                                     const std::optional<DefenseConfig>& defenses, std::uint64_t seed,
                                     EpisodeOptions options = {});

/// Inflation multiplier of a payload before episode noise.
[[nodiscard]] double payload_inflation(const AgentParams& p, const PayloadFeatures& f);
/// Complexity driving fidelity loss and disengagement.
[[nodiscard]] double payload_complexity(const PayloadFeatures& f);
[[nodiscard]] double engage_probability(const AgentParams& p, const PayloadFeatures& f);
[[nodiscard]] double fidelity_failure_probability(const AgentParams& p, const PayloadFeatures& f);

/// Remote agent boundary. The shipped implementation refuses every call
/// unless an endpoint is configured.
struct RemoteRequest {
    std::vector<TokenId> history;
    std::vector<TokenId> suffix;
    AccessMode mode = AccessMode::Black;
    std::size_t k = 5;
};

struct RemoteResponse {
    std::vector<TokenId> tokens;
    std::vector<std::vector<std::pair<TokenId, double>>> top_logprobs;
};

class RemoteAgentAdapter {
public:
    explicit RemoteAgentAdapter(std::string endpoint = {}) : endpoint_(std::move(endpoint)) {}
    [[nodiscard]] bool configured() const noexcept { return !endpoint_.empty(); }
    /// Throws std::runtime_error: no transport ships with this build.
    RemoteResponse respond(const RemoteRequest& request) const;
    /// Credentials are read from this environment variable.
    static constexpr const char* kCredentialEnv = "RDOS_REMOTE_API_KEY";

private:
    std::string endpoint_;
};

} // namespace rdos
