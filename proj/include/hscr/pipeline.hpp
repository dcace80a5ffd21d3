#pragma once

#include <cstdint>
#include <vector>

#include "hscr/config.hpp"
#include "hscr/dataset.hpp"
#include "hscr/mlpo.hpp"
#include "hscr/prefgen.hpp"
#include "hscr/reports.hpp"

namespace hscr {

// The CLI subcommands, the ablation driver and the acceptance suite all run
// the same steps through these helpers.

SftResult pipeline_sft(const AppConfig& config,
                       const std::vector<CorpusEntry>& train_corpus);

struct GenOutput {
    RawDataset dataset;
    GenStats stats;
};

GenOutput pipeline_generate(const AppConfig& config, const ModelParams& reference,
                            const std::vector<CorpusEntry>& corpus);

struct RerankOutput {
    RankedDataset dataset;
    int64_t dropped = 0;  // records with fewer than two gap-separated survivors
};

RerankOutput pipeline_rerank(const AppConfig& config, const RawDataset& raw);

TrainResult pipeline_train(const AppConfig& config, const ModelParams& reference,
                           const RankedDataset& dataset);

}  // namespace hscr
