#include "rdos/core.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace rdos {

namespace {

bool has_space(std::string_view s)
{
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

} // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words)
{
    tokens_.reserve(words.size() + 1);
    tokens_.push_back({kUnkId, std::string(kUnkText)});
    index_.emplace(std::string(kUnkText), kUnkId);
    for (const auto& w : words) {
        if (w.empty() || has_space(w)) {
            throw std::invalid_argument("vocabulary word must be non-empty without whitespace: '" + w + "'");
        }
        const auto id = static_cast<TokenId>(tokens_.size());
        if (!index_.emplace(w, id).second) {
            throw std::invalid_argument("duplicate vocabulary word: " + w);
        }
        tokens_.push_back({id, w});
    }
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const
{
    const auto it = index_.find(std::string(text));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

TokenId Vocabulary::id_of(std::string_view text) const
{
    if (auto id = find(text)) {
        return *id;
    }
    throw std::out_of_range("token not in vocabulary: " + std::string(text));
}

const std::string& Vocabulary::text(TokenId id) const
{
    if (id >= tokens_.size()) {
        throw std::out_of_range("token id out of range: " + std::to_string(id));
    }
    return tokens_[id].text;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab)
{
    if (vocab.empty()) {
        throw std::invalid_argument("tokenize: empty vocabulary");
    }
    TokenSeq out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])) != 0) {
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j])) == 0) {
            ++j;
        }
        if (j > i) {
            out.push_back(vocab.find(text.substr(i, j - i)).value_or(kUnkId));
        }
        i = j;
    }
    return out;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab)
{
    std::string out;
    for (const auto t : tokens) {
        if (!out.empty()) {
            out += ' ';
        }
        out += vocab.text(t);
    }
    return out;
}

std::optional<double> TokenDistribution::prob(TokenId token) const
{
    for (const auto& [id, p] : entries) {
        if (id == token) {
            return p;
        }
    }
    return std::nullopt;
}

void TokenDistribution::validate() const
{
    double sum = 0.0;
    for (const auto& [id, p] : entries) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("probability outside [0,1]");
        }
        sum += p;
    }
    if (mode == DistributionMode::Full) {
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("full distribution does not sum to 1");
        }
        return;
    }
    if (k == 0 || entries.size() > k) {
        throw std::invalid_argument("top-k view has more than k entries");
    }
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].second > entries[i - 1].second) {
            throw std::invalid_argument("top-k view not sorted descending");
        }
    }
}

Turn Turn::make(std::size_t index, TokenSeq thought, Action action, TokenSeq action_tokens,
                TokenSeq observation, double sim_latency)
{
    Turn t;
    t.index = index;
    t.reasoning_tokens = thought.size() + action_tokens.size();
    t.thought = std::move(thought);
    t.action = std::move(action);
    t.action_tokens = std::move(action_tokens);
    t.observation = std::move(observation);
    t.sim_latency = sim_latency;
    return t;
}

std::string_view to_string(Outcome o) noexcept
{
    switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    case Outcome::TerminatedByDefense: return "terminated-by-defense";
    }
    return "failure";
}

Outcome outcome_from_string(std::string_view s)
{
    if (s == "success") return Outcome::Success;
    if (s == "failure") return Outcome::Failure;
    if (s == "terminated-by-defense") return Outcome::TerminatedByDefense;
    throw std::invalid_argument("unknown outcome: " + std::string(s));
}

std::size_t Trajectory::total_reasoning_tokens() const noexcept
{
    return std::accumulate(turns.begin(), turns.end(), std::size_t{0},
                           [](std::size_t acc, const Turn& t) { return acc + t.reasoning_tokens; });
}

double Trajectory::total_latency() const noexcept
{
    double s = 0.0;
    for (const auto& t : turns) {
        s += t.sim_latency;
    }
    return s;
}

std::size_t reasoning_tokens(const Trajectory& traj, std::size_t from_turn, std::size_t to_turn)
{
    if (from_turn < 1 || from_turn > to_turn || to_turn > traj.final_turn()) {
        throw std::out_of_range("reasoning_tokens: invalid turn range [" + std::to_string(from_turn) + ", " +
                                std::to_string(to_turn) + "] for T=" + std::to_string(traj.final_turn()));
    }
    std::size_t sum = 0;
    for (std::size_t t = from_turn; t <= to_turn; ++t) {
        sum += traj.turns[t - 1].reasoning_tokens;
    }
    return sum;
}

Trajectory append_turn(Trajectory traj, Turn turn)
{
    if (turn.index != traj.final_turn() + 1) {
        throw std::invalid_argument("append_turn: expected index " + std::to_string(traj.final_turn() + 1) +
                                    ", got " + std::to_string(turn.index));
    }
    traj.turns.push_back(std::move(turn));
    return traj;
}

AgentAccess AgentAccess::black(std::size_t k)
{
    AgentAccess a{AccessMode::Black, k, false};
    a.validate();
    return a;
}

void AgentAccess::validate() const
{
    if (mode == AccessMode::White && !attention_available) {
        throw std::invalid_argument("white access requires attention");
    }
    if (mode == AccessMode::Black && (attention_available || k == 0)) {
        throw std::invalid_argument("black access requires k > 0 and no attention");
    }
}

} // namespace rdos
