#include "rdos/payload.hpp"

#include "rdos/defense.hpp"

#include <algorithm>

namespace rdos {

TokenSeq Payload::render() const
{
    TokenSeq out = local_sink;
    out.insert(out.end(), persistent_policy.begin(), persistent_policy.end());
    return out;
}

PayloadFeatures Payload::features(std::span<const TokenId> task_context, TokenId nesting_marker) const
{
    PayloadFeatures f;
    f.length = local_sink.size() + persistent_policy.size();
    f.nesting_depth = static_cast<std::size_t>(std::count(local_sink.begin(), local_sink.end(), nesting_marker));
    f.persistent = has_policy();
    const auto rendered = render();
    f.consistency = relevance_score(rendered, task_context);
    return f;
}

void Payload::validate() const
{
    if (local_sink.empty()) {
        throw std::invalid_argument("payload local sink must be non-empty");
    }
}

} // namespace rdos
