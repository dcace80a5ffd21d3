#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hscr/corpus.hpp"
#include "hscr/dataset.hpp"
#include "hscr/model.hpp"

namespace hscr {

struct EvalReport {
    double closed_accuracy = 0.0;  // greedy first token matches the answer
    double open_recall = 0.0;      // fraction of reference tokens recovered
    int64_t closed_count = 0;
    int64_t open_count = 0;
};

EvalReport eval_accuracy(const ModelParams& policy, const std::vector<CorpusEntry>& corpus,
                         double noise_std);

// Distribution of per-response mean token probability exp(logprob / length)
// under the reference model; ten equal bins on [0, 1].
struct ProbabilityStats {
    std::array<int64_t, 10> bins{};
    double median = 0.0;
    double mean = 0.0;
    int64_t count = 0;
};

struct SamplingReport {
    ProbabilityStats self_generated;
    std::optional<ProbabilityStats> external;
};

SamplingReport sampling_probability_report(const ModelParams& reference,
                                           const RawDataset& dataset,
                                           const std::optional<RawDataset>& external,
                                           double noise_std);

// Fig-1a style stand-in for external preference data: every candidate's
// tokens are re-shuffled in place (length- and multiset-preserving).
RawDataset scramble_rejects(const RawDataset& dataset, uint64_t seed);

}  // namespace hscr
