#pragma once

#include <cstdint>
#include <vector>

#include "hscr/model.hpp"
#include "hscr/tensor.hpp"

namespace hscr {

// Per-position contrastive statistics for a teacher-forced response:
// p_diff rows follow Softmax[(1+beta)*logit_full - beta*logit_masked], shift
// holds the raw per-token logit difference logit_full - logit_masked, and
// delta is that shift evaluated at the ground-truth token.
struct DiffDistribution {
    std::vector<std::vector<double>> p_diff;       // [len][V]
    std::vector<std::vector<double>> shift;        // [len][V]
    std::vector<std::vector<double>> masked_prob;  // [len][V], softmax of masked logits
    std::vector<double> delta;                     // [len]
    std::vector<int32_t> chosen;                   // the response tokens
    int64_t positions() const { return static_cast<int64_t>(delta.size()); }
    int64_t vocab() const {
        return p_diff.empty() ? 0 : static_cast<int64_t>(p_diff.front().size());
    }
};

DiffDistribution diff_distribution(const Tensor& logits_full, const Tensor& logits_masked,
                                   const std::vector<int32_t>& response, double beta);

// Top-min(n, len) positions by delta, descending; ties go to the lower index.
std::vector<int64_t> sensitive_tokens(const DiffDistribution& diff, int64_t n);

inline constexpr double default_plausibility_floor(int64_t vocab) {
    return 1.0 / (4.0 * static_cast<double>(vocab));
}

// Replacement pool for one position: non-special tokens other than the
// chosen one whose masked-model probability clears p_floor, ordered by
// ascending logit shift (most prior-driven first; ties to lower id). An
// empty filtered pool falls back to the full non-special vocabulary.
// Token ids below num_specials count as special.
std::vector<int32_t> substitute_candidates(const DiffDistribution& diff, int64_t position,
                                           int32_t chosen_token, double p_floor,
                                           int32_t num_specials = 4);

// Variant r substitutes every sensitive position with that position's r-th
// candidate (clamped to pool size); duplicates are nudged to the next
// untried candidate when the pools allow it.
std::vector<std::vector<int32_t>> variants_from_diff(const DiffDistribution& diff,
                                                     int64_t k, int64_t n, double p_floor,
                                                     int32_t num_specials = 4);

struct GenerationDetail {
    std::vector<std::vector<int32_t>> variants;
    std::vector<double> delta;
    std::vector<int64_t> sensitive;
};

GenerationDetail generate_dispreferred(const ModelParams& reference,
                                       const VisualInput& visual,
                                       const std::vector<int32_t>& prompt,
                                       const std::vector<int32_t>& chosen, int64_t k,
                                       double beta, int64_t n, const MaskSpec& mask);

struct GenConfig {
    int64_t k = 4;
    double beta = 0.9;
    int64_t n = 10;
    std::string mask_strategy = "token";
    double mask_ratio = 0.7;
    double noise_std = 0.0;     // must match the corpus derivation
    bool sampled_mode = false;  // reserved; only the deterministic mode exists
    uint64_t seed = 1;
    double p_floor(int64_t vocab) const { return default_plausibility_floor(vocab); }
};

struct RawRecord {
    int64_t id = 0;
    Scene scene;
    uint64_t visual_seed = 0;
    std::vector<int32_t> prompt;
    std::vector<int32_t> chosen;
    std::vector<std::vector<int32_t>> candidates;
};

struct GenStats {
    int64_t records = 0;
    int64_t failed = 0;
    double mean_abs_delta = 0.0;  // over all response positions in the corpus
};

struct CorpusEntry;  // corpus.hpp

struct GenerationRun {
    std::vector<RawRecord> records;
    GenStats stats;
};

GenerationRun generation_run(const ModelParams& reference,
                             const std::vector<CorpusEntry>& corpus,
                             const GenConfig& config);

}  // namespace hscr
