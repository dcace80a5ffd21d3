#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hscr/graph.hpp"
#include "hscr/model.hpp"
#include "hscr/rerank.hpp"

namespace hscr {

// One training unit: prompt, preferred response, and the rank-ordered
// dispreferred list (rank 1 = highest similarity = preferred side of Eq-6
// style pairs).
struct PreferenceRecord {
    int64_t id = 0;
    Scene scene;
    uint64_t visual_seed = 0;
    std::vector<int32_t> prompt;
    std::vector<int32_t> chosen;
    std::vector<RankedCandidate> rejected;
};

enum class LossMode { hscr, explicit_only, implicit_only, dpo };

LossMode loss_mode_from_string(const std::string& s);
std::string to_string(LossMode m);

struct TrainConfig {
    LossMode loss_mode = LossMode::hscr;
    double gamma = 0.1;
    double learning_rate = 1e-4;
    int64_t epochs = 2;
    int64_t batch_size = 8;
    double noise_std = 0.0;   // visual reconstruction, must match the corpus
    uint64_t seed = 1;
    void validate() const;
};

// --- loss values (frozen reference folded in as constants) ------------------

// gamma * (log pi_policy(y) - log pi_reference(y)); the partition term of the
// underlying reward cancels in every pairwise comparison and is omitted, so
// values are only comparable within a fixed prompt.
double implicit_reward(const ModelParams& policy, const ModelParams& reference,
                       const VisualInput& visual, const std::vector<int32_t>& prompt,
                       const std::vector<int32_t>& response, double gamma);

double dpo_pair_loss(const ModelParams& policy, const ModelParams& reference,
                     const VisualInput& visual, const std::vector<int32_t>& prompt,
                     const std::vector<int32_t>& chosen,
                     const std::vector<int32_t>& rejected, double gamma);

struct LossBreakdown {
    double total = 0.0;
    double explicit_part = 0.0;
    double implicit_part = 0.0;
    int64_t explicit_pairs = 0;
    int64_t implicit_pairs = 0;
};

double explicit_loss(const ModelParams& policy, const ModelParams& reference,
                     const VisualInput& visual, const PreferenceRecord& record,
                     double gamma);
double implicit_loss(const ModelParams& policy, const ModelParams& reference,
                     const VisualInput& visual, const PreferenceRecord& record,
                     double gamma);
LossBreakdown hscr_loss(const ModelParams& policy, const ModelParams& reference,
                        const VisualInput& visual, const PreferenceRecord& record,
                        double gamma);

// --- tape construction (used by train and the gradient checks) --------------

struct RecordLossNodes {
    Graph::Id total = -1;
    Graph::Id explicit_part = -1;  // -1 when the mode has no such component
    Graph::Id implicit_part = -1;
};

struct ReferenceLogprobs {
    double chosen = 0.0;
    std::vector<double> rejected;
};

ReferenceLogprobs reference_logprobs(const ModelParams& reference,
                                     const VisualInput& visual,
                                     const PreferenceRecord& record);

RecordLossNodes build_record_loss(Graph& g, ModelParams& policy,
                                  const ReferenceLogprobs& ref,
                                  const VisualInput& visual,
                                  const PreferenceRecord& record, double gamma,
                                  LossMode mode);

// --- training ----------------------------------------------------------------

struct EpochStats {
    double loss_total = 0.0;
    double loss_explicit = 0.0;
    double loss_implicit = 0.0;
    double margin_mean = 0.0;        // mean g(y_w) - g(y_l1) over the dataset
    double margin_last_mean = 0.0;   // mean g(y_l1) - g(y_lj)
    double margin_median = 0.0;
    double rank_order_fraction = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double wall_time_seconds = 0.0;
};

struct TrainResult {
    ModelParams policy;
    TrainReport report;
};

TrainResult train(const ModelParams& policy_init, const ModelParams& reference,
                  const std::vector<PreferenceRecord>& dataset, const TrainConfig& config);

// --- diagnostics -------------------------------------------------------------

struct RecordMargins {
    int64_t id = 0;
    double policy_margin = 0.0;          // log pi_policy(y_w) - log pi_policy(y_l1)
    double reward_margin = 0.0;          // g(y_w) - g(y_l1)
    double reward_margin_last = 0.0;     // g(y_l1) - g(y_lj)
    std::vector<double> rank_rewards;    // g per rejected, rank order
    bool rank_ordered = false;           // g(y_w) > g(y_l1) > ... > g(y_lj)
};

struct MarginReport {
    std::vector<RecordMargins> records;
    double policy_margin_mean = 0.0;
    double policy_margin_median = 0.0;
    double reward_margin_mean = 0.0;
    double reward_margin_last_mean = 0.0;
    double rank_order_fraction = 0.0;
};

MarginReport margin_report(const ModelParams& policy, const ModelParams& reference,
                           const std::vector<PreferenceRecord>& dataset, double gamma,
                           double noise_std);

}  // namespace hscr
