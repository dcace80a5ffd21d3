#include "hscr/prefgen.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "hscr/common.hpp"
#include "hscr/corpus.hpp"
#include "hscr/rng.hpp"
#include "hscr/vocab.hpp"

namespace hscr {

DiffDistribution diff_distribution(const Tensor& logits_full, const Tensor& logits_masked,
                                   const std::vector<int32_t>& response, double beta) {
    require(logits_full.same_shape(logits_masked), "diff_distribution: shape mismatch");
    require(logits_full.shape.size() == 2, "diff_distribution: rank-2 logits required");
    require(logits_full.rows() == static_cast<int64_t>(response.size()),
            "diff_distribution: one logit row per response position required");
    require(beta >= 0.0, "diff_distribution: beta must be >= 0");

    const int64_t L = logits_full.rows(), V = logits_full.cols();
    DiffDistribution d;
    d.chosen = response;
    d.p_diff.resize(static_cast<size_t>(L));
    d.shift.resize(static_cast<size_t>(L));
    d.masked_prob.resize(static_cast<size_t>(L));
    d.delta.resize(static_cast<size_t>(L));
    std::vector<double> combined(static_cast<size_t>(V));
    std::vector<double> masked_row(static_cast<size_t>(V));
    for (int64_t t = 0; t < L; ++t) {
        auto& shift = d.shift[static_cast<size_t>(t)];
        shift.resize(static_cast<size_t>(V));
        for (int64_t v = 0; v < V; ++v) {
            const double full = logits_full.at(t, v);
            const double masked = logits_masked.at(t, v);
            shift[static_cast<size_t>(v)] = full - masked;
            combined[static_cast<size_t>(v)] = (1.0 + beta) * full - beta * masked;
            masked_row[static_cast<size_t>(v)] = masked;
        }
        d.p_diff[static_cast<size_t>(t)] = softmax(combined);
        d.masked_prob[static_cast<size_t>(t)] = softmax(masked_row);
        const int32_t gt = response[static_cast<size_t>(t)];
        require(gt >= 0 && gt < V, "diff_distribution: response token out of range");
        d.delta[static_cast<size_t>(t)] = shift[static_cast<size_t>(gt)];
    }
    return d;
}

std::vector<int64_t> sensitive_tokens(const DiffDistribution& diff, int64_t n) {
    require(n >= 1, "sensitive_tokens: n must be >= 1");
    const int64_t L = diff.positions();
    std::vector<int64_t> order(static_cast<size_t>(L));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        if (diff.delta[static_cast<size_t>(a)] != diff.delta[static_cast<size_t>(b)])
            return diff.delta[static_cast<size_t>(a)] > diff.delta[static_cast<size_t>(b)];
        return a < b;
    });
    order.resize(static_cast<size_t>(std::min(n, L)));
    return order;
}

std::vector<int32_t> substitute_candidates(const DiffDistribution& diff, int64_t position,
                                           int32_t chosen_token, double p_floor,
                                           int32_t num_specials) {
    require(position >= 0 && position < diff.positions(),
            "substitute_candidates: position out of range");
    const int64_t V = diff.vocab();
    const auto& shift = diff.shift[static_cast<size_t>(position)];
    const auto& masked = diff.masked_prob[static_cast<size_t>(position)];

    auto collect = [&](bool filtered) {
        std::vector<int32_t> pool;
        for (int32_t v = 0; v < V; ++v) {
            if (v == chosen_token || v < num_specials) continue;
            if (filtered && masked[static_cast<size_t>(v)] < p_floor) continue;
            pool.push_back(v);
        }
        std::stable_sort(pool.begin(), pool.end(), [&](int32_t a, int32_t b) {
            if (shift[static_cast<size_t>(a)] != shift[static_cast<size_t>(b)])
                return shift[static_cast<size_t>(a)] < shift[static_cast<size_t>(b)];
            return a < b;
        });
        return pool;
    };

    std::vector<int32_t> pool = collect(true);
    if (pool.empty()) pool = collect(false);
    return pool;
}

std::vector<std::vector<int32_t>> variants_from_diff(const DiffDistribution& diff,
                                                     int64_t k, int64_t n, double p_floor,
                                                     int32_t num_specials) {
    require(k >= 2, "variants_from_diff: k must be >= 2");
    require(diff.positions() >= 1, "variants_from_diff: empty response");
    const std::vector<int64_t> sensitive = sensitive_tokens(diff, n);

    std::vector<std::vector<int32_t>> pools;
    pools.reserve(sensitive.size());
    int64_t total_pool = 0;
    for (int64_t pos : sensitive) {
        pools.push_back(substitute_candidates(diff, pos,
                                              diff.chosen[static_cast<size_t>(pos)],
                                              p_floor, num_specials));
        require(!pools.back().empty(),
                "variants_from_diff: vocabulary leaves no substitution candidates");
        total_pool += static_cast<int64_t>(pools.back().size());
    }

    std::vector<std::vector<int32_t>> variants;
    std::set<std::vector<int32_t>> used;
    std::vector<size_t> assign(sensitive.size(), 0);
    auto apply = [&]() {
        std::vector<int32_t> v = diff.chosen;
        for (size_t i = 0; i < sensitive.size(); ++i)
            v[static_cast<size_t>(sensitive[i])] = pools[i][assign[i]];
        return v;
    };

    for (int64_t r = 0; r < k; ++r) {
        for (size_t i = 0; i < sensitive.size(); ++i)
            assign[i] = std::min(static_cast<size_t>(r), pools[i].size() - 1);
        std::vector<int32_t> v = apply();
        if (used.count(v)) {
            // Nudge one position at a time to the next pool entry until an
            // unused combination appears; pools may genuinely be exhausted.
            for (int64_t attempt = 0; attempt < total_pool; ++attempt) {
                const size_t i = static_cast<size_t>(attempt) % sensitive.size();
                assign[i] = (assign[i] + 1) % pools[i].size();
                v = apply();
                if (!used.count(v)) break;
            }
        }
        used.insert(v);
        variants.push_back(std::move(v));
    }
    return variants;
}

namespace {

Tensor response_logits(const ModelParams& reference, const VisualInput& visual,
                       const std::vector<int32_t>& prompt,
                       const std::vector<int32_t>& chosen,
                       const std::optional<MaskSpec>& mask) {
    std::vector<int32_t> text = prompt;
    text.insert(text.end(), chosen.begin(), chosen.end());
    const Tensor all = forward_logits(reference, visual, text, mask);
    const int64_t P = static_cast<int64_t>(prompt.size());
    const int64_t R = static_cast<int64_t>(chosen.size());
    Tensor out = Tensor::zeros({R, all.cols()});
    std::copy(all.data.begin() + P * all.cols(), all.data.begin() + (P + R) * all.cols(),
              out.data.begin());
    return out;
}

}  // namespace

GenerationDetail generate_dispreferred(const ModelParams& reference,
                                       const VisualInput& visual,
                                       const std::vector<int32_t>& prompt,
                                       const std::vector<int32_t>& chosen, int64_t k,
                                       double beta, int64_t n, const MaskSpec& mask) {
    require(!chosen.empty(), "generate_dispreferred: empty preferred response");
    require(k >= 2, "generate_dispreferred: k must be >= 2");
    require(n >= 1, "generate_dispreferred: n must be >= 1");
    mask.validate();

    const Tensor full = response_logits(reference, visual, prompt, chosen, std::nullopt);
    const Tensor masked = response_logits(reference, visual, prompt, chosen, mask);
    DiffDistribution diff = diff_distribution(full, masked, chosen, beta);

    GenerationDetail detail;
    detail.variants = variants_from_diff(diff, k, n,
                                         default_plausibility_floor(reference.dims.vocab),
                                         vocab::kNumSpecials);
    detail.sensitive = sensitive_tokens(diff, n);
    detail.delta = std::move(diff.delta);
    return detail;
}

GenerationRun generation_run(const ModelParams& reference,
                             const std::vector<CorpusEntry>& corpus,
                             const GenConfig& config) {
    require(!corpus.empty(), "generation_run: empty corpus");
    require(!config.sampled_mode,
            "generation_run: sampled_mode is reserved and not implemented");
    require(config.k >= 2 && config.n >= 1 && config.beta >= 0.0,
            "generation_run: invalid config");

    const MaskStrategy strategy = mask_strategy_from_string(config.mask_strategy);
    GenerationRun run;
    double abs_delta_sum = 0.0;
    int64_t delta_count = 0;
    for (const CorpusEntry& entry : corpus) {
        try {
            const VisualInput visual = visual_features(entry.scene, entry.visual_seed,
                                                       config.noise_std, reference.dims);
            MaskSpec mask{strategy, config.mask_ratio,
                          Rng::mix(config.seed, static_cast<uint64_t>(entry.id))};
            GenerationDetail detail = generate_dispreferred(
                reference, visual, entry.prompt, entry.chosen, config.k, config.beta,
                config.n, mask);
            RawRecord rec;
            rec.id = entry.id;
            rec.scene = entry.scene;
            rec.visual_seed = entry.visual_seed;
            rec.prompt = entry.prompt;
            rec.chosen = entry.chosen;
            rec.candidates = std::move(detail.variants);
            run.records.push_back(std::move(rec));
            for (double d : detail.delta) abs_delta_sum += std::abs(d);
            delta_count += static_cast<int64_t>(detail.delta.size());
        } catch (const std::exception&) {
            ++run.stats.failed;
        }
    }
    ensure(run.stats.failed * 10 <= static_cast<int64_t>(corpus.size()),
           "generation_run: more than 10% of records failed");
    run.stats.records = static_cast<int64_t>(run.records.size());
    run.stats.mean_abs_delta =
        delta_count > 0 ? abs_delta_sum / static_cast<double>(delta_count) : 0.0;
    return run;
}

}  // namespace hscr
