#include "rdos/random.hpp"
#include "rdos/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rdos {

namespace {

constexpr double kBenignShare = 0.85;
constexpr double kAltShare = 0.03; // per alternative, three alternatives
constexpr double kRestShare = 0.06;
constexpr double kAttentionGain = 0.5;

bool is_slot_word(const Lexicon& lex, TokenId t)
{
    static const std::vector<std::string_view> words = {"will", "should", "to", "then", "next", "now"};
    const auto& text = lex.vocab.text(t);
    return std::find(words.begin(), words.end(), text) != words.end();
}

} // namespace

void AgentParams::validate() const
{
    if (!(susceptibility >= 0.0 && susceptibility <= 1.0)) {
        throw std::invalid_argument("susceptibility must lie in [0,1]");
    }
    if (!(base_reasoning > 0.0)) {
        throw std::invalid_argument("base_reasoning must be positive");
    }
    if (!(benign_accuracy >= 0.0 && benign_accuracy <= 1.0) || !(action_validity >= 0.0 && action_validity <= 1.0)) {
        throw std::invalid_argument("accuracy and validity must be probabilities");
    }
    if (!(local_decay > 0.0 && local_decay <= 1.0)) {
        throw std::invalid_argument("local_decay must lie in (0,1]");
    }
}

AgentParams reference_params(EnvKind kind)
{
    AgentParams p;
    switch (kind) {
    case EnvKind::WebShop: p.susceptibility = 0.9; break;
    case EnvKind::Email: p.susceptibility = 0.75; break;
    case EnvKind::Os: p.susceptibility = 0.6; break;
    }
    return p;
}

// ---------------------------------------------------------------------------
// SyntheticAgent

SyntheticAgent::SyntheticAgent(std::uint64_t seed, AgentAccess access, AgentParams params, const Lexicon& lex)
    : seed_(seed), access_(access), params_(params), lex_(&lex)
{
    access_.validate();
    params_.validate();
    affinity_.resize(lex.vocab.size());
    for (std::size_t t = 1; t < affinity_.size(); ++t) {
        affinity_[t] = keyed_normal({seed_, fnv1a("affinity"), t});
    }
    std::vector<double> fluency;
    for (const auto v : lex.intent_verbs) {
        fluency.push_back(0.5 * keyed_normal({seed_, fnv1a("fluency"), v}));
    }
    const double mx = *std::max_element(fluency.begin(), fluency.end());
    double z = 0.0;
    for (auto& f : fluency) {
        f = std::exp(f - mx);
        z += f;
    }
    for (auto& f : fluency) {
        f /= z;
    }
    intent_weights_ = std::move(fluency);
}

double SyntheticAgent::intent_weight(TokenId verb) const
{
    const auto& verbs = lex_->intent_verbs;
    const auto it = std::find(verbs.begin(), verbs.end(), verb);
    return it == verbs.end() ? 0.0 : intent_weights_[static_cast<std::size_t>(it - verbs.begin())];
}

double SyntheticAgent::trigger_probability(std::span<const TokenId> suffix) const
{
    double dot = 0.0;
    for (const auto t : suffix) {
        dot += affinity_.at(t);
    }
    return logistic(params_.susceptibility * dot);
}

ResponseModel SyntheticAgent::model(ResponseContext ctx) const
{
    return ResponseModel(*this, std::move(ctx));
}

Response SyntheticAgent::respond(const ResponseContext& ctx, std::span<const TokenId> suffix) const
{
    if (ctx.history.empty() && suffix.empty() && ctx.trailing.empty()) {
        throw std::invalid_argument("respond: empty context");
    }
    return model(ctx).respond(suffix);
}

std::size_t SyntheticAgent::benign_length(std::uint64_t episode_seed, std::size_t step) const
{
    const double noise = std::exp(0.2 * keyed_normal({seed_, episode_seed, fnv1a("benign-length"), step}));
    return static_cast<std::size_t>(std::lround(params_.base_reasoning * noise));
}

// ---------------------------------------------------------------------------
// ResponseModel

ResponseModel::ResponseModel(const SyntheticAgent& agent, ResponseContext ctx)
    : agent_(&agent), ctx_(std::move(ctx)), vocab_size_(agent.lexicon().vocab.size())
{
    const auto& p = agent.params();
    const auto context_len = ctx_.history.size() + ctx_.trailing.size();
    if (context_len > p.context_cap) {
        throw std::length_error("respond: context of " + std::to_string(context_len) + " tokens exceeds cap " +
                                std::to_string(p.context_cap) + "; truncate first");
    }
    if (ctx_.benign_response.empty()) {
        throw std::invalid_argument("respond: benign response must be non-empty");
    }
    const auto& lex = agent.lexicon();
    const auto n = ctx_.benign_response.size();
    const auto& aff = agent.affinity();
    weights_.resize(n * vocab_size_);
    align_.resize(n);
    alternatives_.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t t = 0; t < vocab_size_; ++t) {
            const double local = t == kUnkId ? 0.0
                                             : p.position_spread *
                                                   keyed_normal({agent.seed(), ctx_.task_key, fnv1a("pos"), a, t});
            weights_[a * vocab_size_ + t] = p.affinity_scale * (aff[t] + local);
        }
        double profile = -1.2;
        if (a == 0) {
            profile = -3.0;
        } else if (is_slot_word(lex, ctx_.benign_response[a - 1])) {
            profile = 0.0;
        }
        align_[a] = profile - ctx_.resistance + 0.25 * keyed_normal({agent.seed(), ctx_.task_key, fnv1a("align"), a}) +
                    (ctx_.surface == Surface::Environment ? p.environment_surface_bonus : 0.0);

        const TokenId benign = ctx_.benign_response[a];
        std::size_t filled = 0;
        for (std::uint64_t k = 0; filled < 3; ++k) {
            const auto& pool = lex.filler_words;
            const TokenId cand = pool[splitmix64(hash_keys({agent.seed(), ctx_.task_key, a, k})) % pool.size()];
            const auto begin = alternatives_[a].begin();
            if (cand != benign && std::find(begin, begin + static_cast<std::ptrdiff_t>(filled), cand) ==
                                      begin + static_cast<std::ptrdiff_t>(filled)) {
                alternatives_[a][filled++] = cand;
            }
        }
    }
}

bool ResponseModel::is_intent(TokenId t) const noexcept
{
    return agent_->lexicon().is_intent_verb(t);
}

double ResponseModel::suffix_score(std::size_t anchor, std::span<const TokenId> suffix) const
{
    double s = 0.0;
    for (const auto t : suffix) {
        s += token_weight(anchor, t);
    }
    return s;
}

double ResponseModel::hijack_mass(std::size_t anchor, SlotState state, double score) const
{
    const auto& p = agent_->params();
    const double bonus = state == SlotState::AfterIntent ? p.continuation_bonus : 0.0;
    return logistic(p.susceptibility * (score + align_[anchor] + bonus) - p.hijack_offset);
}

double ResponseModel::prob(std::size_t anchor, SlotState state, double score, TokenId token) const
{
    const auto& lex = agent_->lexicon();
    const double h = hijack_mass(anchor, state, score);
    const TokenId benign = ctx_.benign_response[anchor];
    const auto& alts = alternatives_[anchor];

    const bool benign_hijack = state == SlotState::Normal ? is_intent(benign) : benign == lex.url;
    const std::size_t hijack_count = state == SlotState::Normal ? lex.intent_verbs.size() : 1;
    const std::size_t named = hijack_count + 3 + (benign_hijack ? 0 : 1);
    const double rest_each = (1.0 - h) * kRestShare / static_cast<double>(vocab_size_ - named);

    double m = 0.0;
    bool in_hijack = false;
    if (state == SlotState::Normal && is_intent(token)) {
        m += h * agent_->intent_weight(token);
        in_hijack = true;
    } else if (state == SlotState::AfterIntent && token == lex.url) {
        m += h;
        in_hijack = true;
    }
    if (token == benign) {
        m += kBenignShare * (1.0 - h);
    } else if (std::find(alts.begin(), alts.end(), token) != alts.end()) {
        m += kAltShare * (1.0 - h);
    } else if (!in_hijack) {
        m += rest_each;
    }
    return m;
}

std::vector<std::pair<TokenId, double>> ResponseModel::head(std::size_t anchor, SlotState state, double score) const
{
    const auto& lex = agent_->lexicon();
    std::vector<TokenId> named;
    if (state == SlotState::Normal) {
        named = lex.intent_verbs;
    } else {
        named.push_back(lex.url);
    }
    const TokenId benign = ctx_.benign_response[anchor];
    if (std::find(named.begin(), named.end(), benign) == named.end()) {
        named.push_back(benign);
    }
    named.insert(named.end(), alternatives_[anchor].begin(), alternatives_[anchor].end());
    std::vector<std::pair<TokenId, double>> out;
    out.reserve(named.size());
    for (const auto t : named) {
        out.emplace_back(t, prob(anchor, state, score, t));
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        return x.second != y.second ? x.second > y.second : x.first < y.first;
    });
    return out;
}

TokenDistribution ResponseModel::distribution(std::size_t anchor, SlotState state, double score,
                                              std::size_t position) const
{
    TokenDistribution d;
    d.position = position;
    if (agent_->access().mode == AccessMode::White) {
        d.mode = DistributionMode::Full;
        d.entries.reserve(vocab_size_);
        for (std::size_t t = 0; t < vocab_size_; ++t) {
            d.entries.emplace_back(static_cast<TokenId>(t), prob(anchor, state, score, static_cast<TokenId>(t)));
        }
        return d;
    }
    const std::size_t k = agent_->access().k;
    d.mode = DistributionMode::TopK;
    d.k = k;
    auto entries = head(anchor, state, score);
    if (entries.size() < k) {
        // Pad with equal-mass tail tokens in id order.
        std::vector<bool> used(vocab_size_, false);
        for (const auto& e : entries) {
            used[e.first] = true;
        }
        for (std::size_t t = 0; t < vocab_size_ && entries.size() < k; ++t) {
            if (!used[t]) {
                entries.emplace_back(static_cast<TokenId>(t), prob(anchor, state, score, static_cast<TokenId>(t)));
            }
        }
    }
    entries.resize(std::min(entries.size(), k));
    d.entries = std::move(entries);
    return d;
}

double ResponseModel::view_prob(std::size_t anchor, SlotState state, double score, TokenId token, double floor) const
{
    if (agent_->access().mode == AccessMode::White) {
        return prob(anchor, state, score, token);
    }
    const auto view = distribution(anchor, state, score, 0);
    return view.prob(token).value_or(floor);
}

Response ResponseModel::respond(std::span<const TokenId> suffix) const
{
    const auto& lex = agent_->lexicon();
    const std::size_t n = anchors();
    Response r;
    r.trigger_mass = agent_->trigger_probability(suffix);
    r.suffix_begin = ctx_.history.size();
    r.suffix_end = r.suffix_begin + suffix.size();

    std::vector<double> scores(n);
    for (std::size_t a = 0; a < n; ++a) {
        scores[a] = suffix_score(a, suffix);
    }

    const bool white = agent_->access().mode == AccessMode::White;
    std::vector<std::vector<double>> attention;
    auto attention_row = [&](std::size_t anchor) {
        const std::size_t len = ctx_.history.size() + suffix.size() + ctx_.trailing.size();
        std::vector<double> row(len, 1.0);
        for (std::size_t i = 0; i < suffix.size(); ++i) {
            row[r.suffix_begin + i] =
                std::exp(kAttentionGain * token_weight(anchor, suffix[i]) / agent_->params().affinity_scale);
        }
        const double z = std::accumulate(row.begin(), row.end(), 0.0);
        for (auto& w : row) {
            w /= z;
        }
        return row;
    };
    auto emit = [&](TokenId t, std::size_t anchor, SlotState state) {
        r.distributions.push_back(distribution(anchor, state, scores[anchor], r.tokens.size() + 1));
        r.anchors.push_back(anchor);
        r.states.push_back(state);
        if (white) {
            attention.push_back(attention_row(anchor));
        }
        r.tokens.push_back(t);
    };

    // Favourite intent verb of this agent.
    const auto fav_it = std::max_element(agent_->intent_weights().begin(), agent_->intent_weights().end());
    const TokenId favourite = lex.intent_verbs[static_cast<std::size_t>(fav_it - agent_->intent_weights().begin())];

    std::size_t anchor = 0;
    SlotState state = SlotState::Normal;
    while (anchor < n) {
        const TokenId benign = ctx_.benign_response[anchor];
        const double pb = prob(anchor, state, scores[anchor], benign);
        const TokenId hijack = state == SlotState::Normal ? favourite : lex.url;
        const double ph = prob(anchor, state, scores[anchor], hijack);
        if (hijack != benign && ph > pb) {
            emit(hijack, anchor, state);
            if (state == SlotState::AfterIntent) {
                r.target_emitted = true;
                break;
            }
            state = SlotState::AfterIntent;
            continue;
        }
        emit(benign, anchor, state);
        state = is_intent(benign) ? SlotState::AfterIntent : SlotState::Normal;
        ++anchor;
    }
    if (r.target_emitted) {
        // Tool call rendered after the hijacked intent; the decoder is certain here.
        for (const TokenId t : {lex.vocab.id_of("action"), lex.vocab.id_of("get_webpage"), lex.url}) {
            TokenDistribution d;
            d.position = r.tokens.size() + 1;
            if (white) {
                d.entries.reserve(vocab_size_);
                const double rest = 0.03 / static_cast<double>(vocab_size_ - 1);
                for (std::size_t v = 0; v < vocab_size_; ++v) {
                    d.entries.emplace_back(static_cast<TokenId>(v), v == t ? 0.97 : rest);
                }
            } else {
                d.mode = DistributionMode::TopK;
                d.k = agent_->access().k;
                d.entries.emplace_back(t, 0.97);
            }
            r.distributions.push_back(std::move(d));
            r.anchors.push_back(n);
            r.states.push_back(SlotState::Normal);
            if (white) {
                attention.push_back(attention_row(n - 1));
            }
            r.tokens.push_back(t);
        }
    }
    if (white) {
        r.attention = std::move(attention);
    }
    return r;
}

// ---------------------------------------------------------------------------

TokenSeq truncate_context(const TokenSeq& tokens, std::size_t cap)
{
    if (tokens.size() <= cap) {
        return tokens;
    }
    const std::size_t head = cap / 4;
    const std::size_t tail = cap - head;
    TokenSeq out(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(head));
    out.insert(out.end(), tokens.end() - static_cast<std::ptrdiff_t>(tail), tokens.end());
    return out;
}

ResponseContext injection_context(const Environment& env, const SyntheticAgent& agent, Surface surface)
{
    const auto& lex = agent.lexicon();
    ResponseContext ctx;
    ctx.surface = surface;
    ctx.task_key = hash_keys({static_cast<std::uint64_t>(env.kind), env.task_id, static_cast<std::uint64_t>(surface)});
    ctx.resistance = agent.params().resistance_max * keyed_uniform({ctx.task_key, fnv1a("resistance")});
    ctx.history = env.instruction;
    const std::size_t step = injection_step(surface);
    for (std::size_t s = 0; s < step; ++s) {
        const auto& p = env.plan[s];
        ctx.history.insert(ctx.history.end(), p.thought.begin(), p.thought.end());
        auto action = tokenize(p.action.tool + " " + p.action.argument, lex.vocab);
        ctx.history.insert(ctx.history.end(), action.begin(), action.end());
        const auto out = env.tool_outputs.find(p.action.tool);
        if (out != env.tool_outputs.end()) {
            ctx.history.insert(ctx.history.end(), out->second.begin(), out->second.end());
        }
    }
    ctx.history = truncate_context(ctx.history, agent.params().context_cap);
    const auto& p = env.plan.at(step);
    ctx.benign_response = p.thought;
    auto action = tokenize("action " + p.action.tool + " " + p.action.argument, lex.vocab);
    ctx.benign_response.insert(ctx.benign_response.end(), action.begin(), action.end());
    return ctx;
}

} // namespace rdos
