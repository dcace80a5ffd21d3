#include "hscr/rerank.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "hscr/common.hpp"
#include "hscr/vocab.hpp"

namespace hscr {

double similarity(const std::vector<int32_t>& a, const std::vector<int32_t>& b) {
    require(!a.empty() && !b.empty(), "similarity: empty sequence");
    std::map<int32_t, int64_t> counts;
    int64_t na = 0, nb = 0;
    for (int32_t t : a) {
        if (vocab::is_special(t)) continue;
        ++counts[t];
        ++na;
    }
    int64_t inter = 0;
    for (int32_t t : b) {
        if (vocab::is_special(t)) continue;
        ++nb;
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++inter;
        }
    }
    if (na + nb == 0) return 1.0;  // both all-special: equal as multisets
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::vector<RankedCandidate> rerank_and_select(const std::vector<int32_t>& chosen,
                                               const std::vector<std::vector<int32_t>>& candidates,
                                               int64_t j, double gap) {
    require(j >= 2, "rerank_and_select: j must be >= 2");
    require(gap >= 0.0, "rerank_and_select: gap must be >= 0");

    std::vector<std::pair<double, size_t>> scored;  // (similarity, generation index)
    scored.reserve(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i)
        scored.emplace_back(similarity(candidates[i], chosen), i);
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    std::vector<RankedCandidate> selected;
    for (const auto& [sim, idx] : scored) {
        if (static_cast<int64_t>(selected.size()) >= j) break;
        if (!selected.empty() && sim > selected.back().similarity - gap + kGapSlack)
            continue;
        RankedCandidate rc;
        rc.tokens = candidates[idx];
        rc.similarity = sim;
        rc.rank = static_cast<int32_t>(selected.size() + 1);
        selected.push_back(std::move(rc));
    }
    return selected;
}

}  // namespace hscr
