#pragma once

#include <cstdint>
#include <vector>

namespace hscr {

// Multiset Dice coefficient over non-special tokens:
// 2*|intersection| / (|a| + |b|). Symmetric, bounded to [0,1], and exactly 1
// iff the two sequences agree as multisets. Sequences whose non-special
// parts are both empty count as equal.
double similarity(const std::vector<int32_t>& a, const std::vector<int32_t>& b);

struct RankedCandidate {
    std::vector<int32_t> tokens;
    double similarity = 0.0;
    int32_t rank = 0;  // 1 = most similar to the preferred response
};

// Sorts candidates by descending similarity to chosen (ties keep generation
// order), then greedily keeps a candidate only when it sits at least `gap`
// below the last kept one, stopping after j. May return fewer than j
// entries; callers drop records with fewer than two survivors.
std::vector<RankedCandidate> rerank_and_select(const std::vector<int32_t>& chosen,
                                               const std::vector<std::vector<int32_t>>& candidates,
                                               int64_t j, double gap = 0.1);

inline constexpr double kGapSlack = 1e-12;

}  // namespace hscr
