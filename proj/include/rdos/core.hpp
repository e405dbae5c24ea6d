#pragma once

// Shared domain types: tokens, distributions, turns and trajectories.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rdos {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kUnkId = 0;
inline constexpr std::string_view kUnkText = "<unk>";

struct Token {
    TokenId id = kUnkId;
    std::string text;
};

/// Fixed token table. Id 0 is always the reserved UNK token.
class Vocabulary {
public:
    Vocabulary() = default;
    /// Builds a table from surface forms; UNK is prepended. Duplicates and
    /// empty or whitespace-bearing words are rejected.
    explicit Vocabulary(const std::vector<std::string>& words);

    [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }
    [[nodiscard]] bool empty() const noexcept { return tokens_.empty(); }
    [[nodiscard]] std::optional<TokenId> find(std::string_view text) const;
    [[nodiscard]] TokenId id_of(std::string_view text) const; // throws if absent
    [[nodiscard]] const std::string& text(TokenId id) const;
    [[nodiscard]] bool contains(TokenId id) const noexcept { return id < tokens_.size(); }
    [[nodiscard]] const std::vector<Token>& tokens() const noexcept { return tokens_; }

private:
    std::vector<Token> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Whitespace tokenizer. Unknown words map to kUnkId.
[[nodiscard]] TokenSeq tokenize(std::string_view text, const Vocabulary& vocab);
[[nodiscard]] std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);

enum class DistributionMode { Full, TopK };

/// Next-token distribution at one response position.
struct TokenDistribution {
    std::size_t position = 0;
    std::vector<std::pair<TokenId, double>> entries;
    DistributionMode mode = DistributionMode::Full;
    std::size_t k = 0;

    /// Probability of `token`, or nullopt when absent from the view.
    [[nodiscard]] std::optional<double> prob(TokenId token) const;
    /// Throws std::invalid_argument when a mode invariant is broken.
    void validate() const;
};

struct Action {
    std::string tool;
    std::string argument;

    friend bool operator==(const Action&, const Action&) = default;
};

struct Turn {
    std::size_t index = 0; // 1-based
    TokenSeq thought;
    Action action;
    TokenSeq action_tokens;
    TokenSeq observation;
    std::size_t reasoning_tokens = 0;
    double sim_latency = 0.0;

    /// Builds a turn with reasoning_tokens = |thought| + |action_tokens|.
    static Turn make(std::size_t index, TokenSeq thought, Action action, TokenSeq action_tokens,
                     TokenSeq observation, double sim_latency);

    friend bool operator==(const Turn&, const Turn&) = default;
};

enum class Outcome { Success, Failure, TerminatedByDefense };

[[nodiscard]] std::string_view to_string(Outcome o) noexcept;
[[nodiscard]] Outcome outcome_from_string(std::string_view s);

struct DefenseEvent {
    std::size_t turn = 0;
    std::string kind; // "filter", "monitor", "token-budget", "tool-budget", "time-budget"
};

struct Trajectory {
    std::vector<Turn> turns;
    std::optional<std::size_t> encounter_turn; // tau
    std::optional<std::size_t> fetch_turn;     // turn whose action fetched the attacker url
    Outcome outcome = Outcome::Success;
    std::uint64_t seed = 0;
    bool target_in_response = false;   // string-level trigger
    bool valid_tool_invocation = false; // schema-valid call to the attacker url
    bool gold_executed = false;
    std::vector<DefenseEvent> defense_events;

    [[nodiscard]] std::size_t final_turn() const noexcept { return turns.size(); }
    [[nodiscard]] std::size_t total_reasoning_tokens() const noexcept;
    [[nodiscard]] double total_latency() const noexcept;
    [[nodiscard]] std::size_t tool_calls() const noexcept { return turns.size(); }
};

/// Sum of reasoning tokens over turns [from_turn, to_turn], 1-based inclusive.
[[nodiscard]] std::size_t reasoning_tokens(const Trajectory& traj, std::size_t from_turn,
                                           std::size_t to_turn);

/// Returns a copy of `traj` with `turn` appended; turn.index must equal T + 1.
[[nodiscard]] Trajectory append_turn(Trajectory traj, Turn turn);

enum class AccessMode { White, Black };

struct AgentAccess {
    AccessMode mode = AccessMode::White;
    std::size_t k = 0;
    bool attention_available = true;

    static AgentAccess white() { return {AccessMode::White, 0, true}; }
    static AgentAccess black(std::size_t k);
    void validate() const;
};

enum class TargetOrigin { Base, Coevolved };

struct TargetIntent {
    TokenSeq tokens;
    TargetOrigin origin = TargetOrigin::Base;
    std::string label;

    friend bool operator==(const TargetIntent&, const TargetIntent&) = default;
};

[[nodiscard]] inline double logistic(double x) noexcept
{
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace rdos
