#pragma once

// Stage II payload genome.

#include "rdos/core.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rdos {

struct PayloadFeatures {
    std::size_t length = 0;
    std::size_t nesting_depth = 0;
    bool persistent = false;
    double consistency = 0.0; // lexical overlap with the task context
};

struct Lineage {
    std::vector<std::uint64_t> parents;
    std::string tag; // operator that produced the payload ("seed", "elite", ...)
};

struct Payload {
    std::uint64_t id = 0;
    TokenSeq local_sink;
    TokenSeq persistent_policy; // empty when absent
    Lineage lineage;

    [[nodiscard]] bool has_policy() const noexcept { return !persistent_policy.empty(); }
    /// Tokens served at the attacker url: sink followed by policy.
    [[nodiscard]] TokenSeq render() const;
    /// Recomputed from the segments. `nesting_marker` is the token that opens a
    /// nested sub-problem.
    [[nodiscard]] PayloadFeatures features(std::span<const TokenId> task_context, TokenId nesting_marker) const;
    void validate() const;
};

} // namespace rdos
