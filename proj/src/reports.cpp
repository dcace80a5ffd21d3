#include "hscr/reports.hpp"

#include <algorithm>
#include <cmath>

#include "hscr/common.hpp"
#include "hscr/rng.hpp"
#include "hscr/vocab.hpp"

namespace hscr {

EvalReport eval_accuracy(const ModelParams& policy, const std::vector<CorpusEntry>& corpus,
                         double noise_std) {
    require(!corpus.empty(), "eval_accuracy: empty corpus");
    EvalReport report;
    double closed_hits = 0.0;
    double open_recall_sum = 0.0;
    for (const CorpusEntry& e : corpus) {
        const VisualInput visual =
            visual_features(e.scene, e.visual_seed, noise_std, policy.dims);
        const int64_t max_len =
            policy.dims.max_text - static_cast<int64_t>(e.prompt.size());
        const std::vector<int32_t> decoded =
            greedy_decode(policy, visual, e.prompt, max_len);
        if (e.closed) {
            ++report.closed_count;
            if (!decoded.empty() && decoded.front() == e.chosen.front()) closed_hits += 1.0;
        } else {
            ++report.open_count;
            // Multiset recall of the reference answer's non-special tokens.
            std::vector<int32_t> pool = decoded;
            int64_t expected = 0, hit = 0;
            for (int32_t t : e.chosen) {
                if (vocab::is_special(t)) continue;
                ++expected;
                auto it = std::find(pool.begin(), pool.end(), t);
                if (it != pool.end()) {
                    pool.erase(it);
                    ++hit;
                }
            }
            if (expected > 0)
                open_recall_sum += static_cast<double>(hit) / static_cast<double>(expected);
        }
    }
    if (report.closed_count > 0)
        report.closed_accuracy = closed_hits / static_cast<double>(report.closed_count);
    if (report.open_count > 0)
        report.open_recall = open_recall_sum / static_cast<double>(report.open_count);
    return report;
}

namespace {

ProbabilityStats stats_for(const ModelParams& reference, const RawDataset& dataset,
                           double noise_std) {
    ProbabilityStats stats;
    std::vector<double> values;
    for (const RawRecord& r : dataset.records) {
        const VisualInput visual =
            visual_features(r.scene, r.visual_seed, noise_std, reference.dims);
        for (const auto& candidate : r.candidates) {
            const double lp = sequence_logprob(reference, visual, r.prompt, candidate);
            const double p = std::exp(lp / static_cast<double>(candidate.size()));
            values.push_back(p);
            const auto bin = static_cast<size_t>(
                std::min(9.0, std::max(0.0, std::floor(p * 10.0))));
            ++stats.bins[bin];
        }
    }
    stats.count = static_cast<int64_t>(values.size());
    if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        stats.mean = sum / static_cast<double>(values.size());
        std::sort(values.begin(), values.end());
        const size_t n = values.size();
        stats.median =
            n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }
    return stats;
}

}  // namespace

SamplingReport sampling_probability_report(const ModelParams& reference,
                                           const RawDataset& dataset,
                                           const std::optional<RawDataset>& external,
                                           double noise_std) {
    require(!dataset.records.empty(), "sampling_probability_report: empty dataset");
    SamplingReport report;
    report.self_generated = stats_for(reference, dataset, noise_std);
    if (external) {
        require(!external->records.empty(),
                "sampling_probability_report: empty external dataset");
        report.external = stats_for(reference, *external, noise_std);
    }
    return report;
}

RawDataset scramble_rejects(const RawDataset& dataset, uint64_t seed) {
    RawDataset out = dataset;
    for (RawRecord& r : out.records) {
        Rng rng(Rng::mix(seed, static_cast<uint64_t>(r.id)));
        for (auto& candidate : r.candidates) rng.shuffle(candidate);
    }
    return out;
}

}  // namespace hscr
