#include "hscr/mlpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hscr/adam.hpp"
#include "hscr/common.hpp"
#include "hscr/corpus.hpp"
#include "hscr/rng.hpp"

namespace hscr {

LossMode loss_mode_from_string(const std::string& s) {
    if (s == "hscr") return LossMode::hscr;
    if (s == "explicit_only") return LossMode::explicit_only;
    if (s == "implicit_only") return LossMode::implicit_only;
    if (s == "dpo") return LossMode::dpo;
    throw std::invalid_argument("unknown loss mode: " + s);
}

std::string to_string(LossMode m) {
    switch (m) {
        case LossMode::hscr: return "hscr";
        case LossMode::explicit_only: return "explicit_only";
        case LossMode::implicit_only: return "implicit_only";
        case LossMode::dpo: return "dpo";
    }
    return "?";
}

void TrainConfig::validate() const {
    require(gamma > 0.0, "train: gamma must be > 0");
    require(epochs >= 1, "train: epochs must be >= 1");
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(learning_rate > 0.0, "train: learning_rate must be > 0");
}

double implicit_reward(const ModelParams& policy, const ModelParams& reference,
                       const VisualInput& visual, const std::vector<int32_t>& prompt,
                       const std::vector<int32_t>& response, double gamma) {
    return gamma * (sequence_logprob(policy, visual, prompt, response) -
                    sequence_logprob(reference, visual, prompt, response));
}

ReferenceLogprobs reference_logprobs(const ModelParams& reference,
                                     const VisualInput& visual,
                                     const PreferenceRecord& record) {
    ReferenceLogprobs out;
    out.chosen = sequence_logprob(reference, visual, record.prompt, record.chosen);
    out.rejected.reserve(record.rejected.size());
    for (const RankedCandidate& rc : record.rejected)
        out.rejected.push_back(
            sequence_logprob(reference, visual, record.prompt, rc.tokens));
    return out;
}

RecordLossNodes build_record_loss(Graph& g, ModelParams& policy,
                                  const ReferenceLogprobs& ref,
                                  const VisualInput& visual,
                                  const PreferenceRecord& record, double gamma,
                                  LossMode mode) {
    const int64_t k = static_cast<int64_t>(record.rejected.size());
    require(k >= 1, "record loss: at least one rejected candidate required");
    require(static_cast<int64_t>(ref.rejected.size()) == k,
            "record loss: reference logprob count mismatch");
    const bool wants_explicit = mode != LossMode::implicit_only;
    const bool wants_implicit = mode == LossMode::hscr || mode == LossMode::implicit_only;
    if (wants_implicit)
        require(k >= 2, "record loss: implicit preferences need >= 2 rejected candidates");

    // Policy log-probs; the chosen one is shared across every explicit pair.
    Graph::Id lp_chosen = -1;
    if (wants_explicit)
        lp_chosen = build_sequence_logprob(g, policy, visual, record.prompt, record.chosen);
    const int64_t used_k = mode == LossMode::dpo ? 1 : k;
    std::vector<Graph::Id> lp_rejected(static_cast<size_t>(used_k));
    for (int64_t i = 0; i < used_k; ++i)
        lp_rejected[static_cast<size_t>(i)] = build_sequence_logprob(
            g, policy, visual, record.prompt, record.rejected[static_cast<size_t>(i)].tokens);

    // -log sigma(gamma * (delta_hi - delta_lo)) with the frozen reference
    // log-ratios folded into a constant offset.
    auto pair_term = [&](Graph::Id lp_hi, double ref_hi, Graph::Id lp_lo, double ref_lo) {
        Graph::Id diff = g.sub(lp_hi, lp_lo);
        Graph::Id arg = g.add_const(g.scale(diff, gamma), -gamma * (ref_hi - ref_lo));
        return g.neg(g.log_sigmoid(arg));
    };

    RecordLossNodes out;
    std::vector<Graph::Id> totals;
    if (wants_explicit) {
        std::vector<Graph::Id> terms;
        for (int64_t i = 0; i < used_k; ++i)
            terms.push_back(pair_term(lp_chosen, ref.chosen,
                                      lp_rejected[static_cast<size_t>(i)],
                                      ref.rejected[static_cast<size_t>(i)]));
        out.explicit_part = g.add_n(terms);
        totals.push_back(out.explicit_part);
    }
    if (wants_implicit) {
        std::vector<Graph::Id> terms;
        for (int64_t i = 0; i < k; ++i)
            for (int64_t m = i + 1; m < k; ++m)
                terms.push_back(pair_term(lp_rejected[static_cast<size_t>(i)],
                                          ref.rejected[static_cast<size_t>(i)],
                                          lp_rejected[static_cast<size_t>(m)],
                                          ref.rejected[static_cast<size_t>(m)]));
        out.implicit_part = g.add_n(terms);
        totals.push_back(out.implicit_part);
    }
    out.total = totals.size() == 1 ? totals.front() : g.add_n(totals);
    return out;
}

namespace {

LossBreakdown record_loss_value(const ModelParams& policy, const ModelParams& reference,
                                const VisualInput& visual, const PreferenceRecord& record,
                                double gamma, LossMode mode) {
    Graph g;
    ModelParams& p = const_cast<ModelParams&>(policy);
    const ReferenceLogprobs ref = reference_logprobs(reference, visual, record);
    const RecordLossNodes nodes = build_record_loss(g, p, ref, visual, record, gamma, mode);
    LossBreakdown out;
    out.total = g.scalar_value(nodes.total);
    if (nodes.explicit_part >= 0) out.explicit_part = g.scalar_value(nodes.explicit_part);
    if (nodes.implicit_part >= 0) out.implicit_part = g.scalar_value(nodes.implicit_part);
    const int64_t k = static_cast<int64_t>(record.rejected.size());
    out.explicit_pairs = mode == LossMode::dpo ? 1 : k;
    out.implicit_pairs = k * (k - 1) / 2;
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

double dpo_pair_loss(const ModelParams& policy, const ModelParams& reference,
                     const VisualInput& visual, const std::vector<int32_t>& prompt,
                     const std::vector<int32_t>& chosen,
                     const std::vector<int32_t>& rejected, double gamma) {
    PreferenceRecord record;
    record.prompt = prompt;
    record.chosen = chosen;
    record.rejected.push_back({rejected, 0.0, 1});
    return record_loss_value(policy, reference, visual, record, gamma, LossMode::dpo).total;
}

double explicit_loss(const ModelParams& policy, const ModelParams& reference,
                     const VisualInput& visual, const PreferenceRecord& record,
                     double gamma) {
    return record_loss_value(policy, reference, visual, record, gamma,
                             LossMode::explicit_only)
        .total;
}

double implicit_loss(const ModelParams& policy, const ModelParams& reference,
                     const VisualInput& visual, const PreferenceRecord& record,
                     double gamma) {
    return record_loss_value(policy, reference, visual, record, gamma,
                             LossMode::implicit_only)
        .total;
}

LossBreakdown hscr_loss(const ModelParams& policy, const ModelParams& reference,
                        const VisualInput& visual, const PreferenceRecord& record,
                        double gamma) {
    return record_loss_value(policy, reference, visual, record, gamma, LossMode::hscr);
}

MarginReport margin_report(const ModelParams& policy, const ModelParams& reference,
                           const std::vector<PreferenceRecord>& dataset, double gamma,
                           double noise_std) {
    require(!dataset.empty(), "margin_report: empty dataset");
    MarginReport report;
    std::vector<double> policy_margins;
    for (const PreferenceRecord& record : dataset) {
        const VisualInput visual =
            visual_features(record.scene, record.visual_seed, noise_std, policy.dims);
        RecordMargins rm;
        rm.id = record.id;
        const double lp_w_policy =
            sequence_logprob(policy, visual, record.prompt, record.chosen);
        const double g_w = gamma * (lp_w_policy - sequence_logprob(reference, visual,
                                                                   record.prompt,
                                                                   record.chosen));
        for (const RankedCandidate& rc : record.rejected)
            rm.rank_rewards.push_back(implicit_reward(policy, reference, visual,
                                                      record.prompt, rc.tokens, gamma));
        rm.policy_margin =
            lp_w_policy -
            sequence_logprob(policy, visual, record.prompt, record.rejected.front().tokens);
        rm.reward_margin = g_w - rm.rank_rewards.front();
        rm.reward_margin_last = rm.rank_rewards.front() - rm.rank_rewards.back();
        rm.rank_ordered = true;
        double prev = g_w;
        for (double r : rm.rank_rewards) {
            if (r >= prev) {
                rm.rank_ordered = false;
                break;
            }
            prev = r;
        }
        policy_margins.push_back(rm.policy_margin);
        report.policy_margin_mean += rm.policy_margin;
        report.reward_margin_mean += rm.reward_margin;
        report.reward_margin_last_mean += rm.reward_margin_last;
        report.rank_order_fraction += rm.rank_ordered ? 1.0 : 0.0;
        report.records.push_back(std::move(rm));
    }
    const double n = static_cast<double>(report.records.size());
    report.policy_margin_mean /= n;
    report.reward_margin_mean /= n;
    report.reward_margin_last_mean /= n;
    report.rank_order_fraction /= n;
    report.policy_margin_median = median(std::move(policy_margins));
    return report;
}

TrainResult train(const ModelParams& policy_init, const ModelParams& reference,
                  const std::vector<PreferenceRecord>& dataset, const TrainConfig& config) {
    require(!dataset.empty(), "train: empty dataset");
    config.validate();
    for (const PreferenceRecord& r : dataset) {
        require(!r.rejected.empty(), "train: record without rejected candidates");
        if (config.loss_mode == LossMode::hscr ||
            config.loss_mode == LossMode::implicit_only)
            require(r.rejected.size() >= 2,
                    "train: implicit preferences need >= 2 rejected candidates per record");
    }

    const auto t0 = std::chrono::steady_clock::now();

    // Reference log-ratios never change; compute them once.
    std::vector<VisualInput> visuals;
    std::vector<ReferenceLogprobs> refs;
    visuals.reserve(dataset.size());
    refs.reserve(dataset.size());
    for (const PreferenceRecord& r : dataset) {
        visuals.push_back(
            visual_features(r.scene, r.visual_seed, config.noise_std, reference.dims));
        refs.push_back(reference_logprobs(reference, visuals.back(), r));
    }

    ModelParams policy = policy_init;
    policy.set_requires_grad(true);
    Adam opt(policy.parameters(), {.learning_rate = config.learning_rate});
    Rng shuffle_rng(Rng::mix(config.seed, 0x6D6C706F74726EULL));
    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    ModelParams last_good = policy;
    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        EpochStats stats;
        for (size_t begin = 0; begin < order.size();
             begin += static_cast<size_t>(config.batch_size)) {
            const size_t end =
                std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
            Graph g;
            std::vector<Graph::Id> totals;
            double batch_e = 0.0, batch_i = 0.0;
            for (size_t i = begin; i < end; ++i) {
                const size_t ri = order[i];
                RecordLossNodes nodes =
                    build_record_loss(g, policy, refs[ri], visuals[ri], dataset[ri],
                                      config.gamma, config.loss_mode);
                totals.push_back(nodes.total);
                if (nodes.explicit_part >= 0)
                    batch_e += g.scalar_value(nodes.explicit_part);
                if (nodes.implicit_part >= 0)
                    batch_i += g.scalar_value(nodes.implicit_part);
            }
            Graph::Id batch_loss =
                g.scale(g.add_n(totals), 1.0 / static_cast<double>(totals.size()));
            const double loss_value = g.scalar_value(batch_loss);
            if (!std::isfinite(loss_value))
                throw TrainingDiverged("train: non-finite loss", std::move(last_good));
            policy.zero_grads();
            g.backward(batch_loss);
            opt.step();
            if (!policy.all_finite())
                throw TrainingDiverged("train: non-finite parameters", std::move(last_good));
            last_good = policy;
            stats.loss_total += loss_value * static_cast<double>(end - begin);
            stats.loss_explicit += batch_e;
            stats.loss_implicit += batch_i;
        }
        const double n = static_cast<double>(dataset.size());
        stats.loss_total /= n;
        stats.loss_explicit /= n;
        stats.loss_implicit /= n;

        ModelParams frozen = policy;
        frozen.set_requires_grad(false);
        const MarginReport margins =
            margin_report(frozen, reference, dataset, config.gamma, config.noise_std);
        stats.margin_mean = margins.reward_margin_mean;
        stats.margin_last_mean = margins.reward_margin_last_mean;
        stats.margin_median = margins.policy_margin_median;
        stats.rank_order_fraction = margins.rank_order_fraction;
        result.report.epochs.push_back(stats);
    }
    policy.set_requires_grad(false);
    result.policy = std::move(policy);
    result.report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace hscr
