#pragma once

// Independent reference implementations used by the unit and acceptance suites.

#include "rdos/random.hpp"
#include "rdos/stage1.hpp"

#include <algorithm>
#include <vector>

namespace rdos::oracle {

/// Exhaustive search over subsets of at most `limit` pairwise disjoint
/// intervals. Scores are summed in (end, start) order so the total is
/// bit-comparable with any DP that accumulates in the same order.
inline double best_interval_total(const std::vector<Interval>& iv, std::size_t limit)
{
    const std::size_t n = iv.size();
    double best = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<Interval> pick;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                pick.push_back(iv[i]);
            }
        }
        if (pick.size() > limit) {
            continue;
        }
        std::sort(pick.begin(), pick.end(),
                  [](const Interval& a, const Interval& b) { return a.end != b.end ? a.end < b.end : a.start < b.start; });
        bool disjoint = true;
        for (std::size_t i = 1; i < pick.size() && disjoint; ++i) {
            disjoint = pick[i - 1].end < pick[i].start;
        }
        if (!disjoint) {
            continue;
        }
        double total = 0.0;
        for (const auto& p : pick) {
            total += p.score;
        }
        best = std::max(best, total);
    }
    return best;
}

/// Random instance: 1..max_n intervals over positions 1..20, widths 1..3.
/// Every third instance uses quarter-step scores to force ties.
inline std::vector<Interval> random_intervals(Rng& rng, std::size_t max_n, std::size_t instance)
{
    const std::size_t n = 1 + rng.index(max_n);
    std::vector<Interval> iv;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t start = 1 + rng.index(20);
        const std::size_t width = 1 + rng.index(3);
        double score = rng.uniform();
        if (instance % 3 == 0) {
            score = 0.25 * static_cast<double>(rng.index(4));
        }
        iv.push_back({start, start + width - 1, score});
    }
    return iv;
}

} // namespace rdos::oracle
