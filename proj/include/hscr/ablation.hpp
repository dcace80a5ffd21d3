#pragma once

#include <string>
#include <vector>

#include "hscr/config.hpp"

namespace hscr {

enum class AblationKind { mask_strategy, mask_ratio, loss_mode };

AblationKind ablation_kind_from_string(const std::string& s);
std::string to_string(AblationKind k);

struct ArmSeedRun {
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double closed_accuracy = 0.0;
    double open_recall = 0.0;
    double reward_margin_mean = 0.0;
    double rank_order_fraction = 0.0;
    double mean_abs_delta = 0.0;
    int64_t trained_records = 0;
};

struct ArmResult {
    std::string arm;
    std::vector<ArmSeedRun> runs;
    bool failed = false;  // true when any seed run failed
    // Means over the seeds that completed.
    double closed_accuracy = 0.0;
    double open_recall = 0.0;
    double reward_margin_mean = 0.0;
    double rank_order_fraction = 0.0;
    double mean_abs_delta = 0.0;
};

struct AblationResult {
    AblationKind kind = AblationKind::loss_mode;
    std::vector<uint64_t> seeds;
    std::vector<ArmResult> arms;  // first arm is the untrained baseline
    std::string text_table() const;
};

// Runs every arm of the requested ablation over config.ablation.seeds. Arms
// within one seed share the corpus and SFT checkpoint; only the varied
// factor differs. A failing arm is recorded without aborting its siblings.
AblationResult run_ablation(AblationKind kind, const AppConfig& config);

}  // namespace hscr
