#include "hscr/pipeline.hpp"

#include "hscr/common.hpp"

namespace hscr {

SftResult pipeline_sft(const AppConfig& config,
                       const std::vector<CorpusEntry>& train_corpus) {
    SftConfig sft = config.sft;
    sft.seed = config.seed;
    const ModelParams initial = ModelParams::init(config.model, config.seed);
    return sft_train(initial, to_sft_examples(train_corpus, config.model,
                                              config.corpus.noise_std),
                     sft);
}

GenOutput pipeline_generate(const AppConfig& config, const ModelParams& reference,
                            const std::vector<CorpusEntry>& corpus) {
    GenConfig gen = config.gen;
    gen.seed = config.seed;
    gen.noise_std = config.corpus.noise_std;
    GenerationRun run = generation_run(reference, corpus, gen);
    GenOutput out;
    out.stats = run.stats;
    out.dataset.meta = DatasetMeta{gen.beta, gen.mask_strategy, gen.mask_ratio,
                                   gen.n, config.seed, kPipelineVersion};
    out.dataset.records = std::move(run.records);
    return out;
}

RerankOutput pipeline_rerank(const AppConfig& config, const RawDataset& raw) {
    RerankOutput out;
    out.dataset.meta = raw.meta;
    for (const RawRecord& r : raw.records) {
        std::vector<RankedCandidate> selected =
            rerank_and_select(r.chosen, r.candidates, config.rerank_j, config.rerank_gap);
        if (selected.size() < 2) {
            ++out.dropped;
            continue;
        }
        PreferenceRecord rec;
        rec.id = r.id;
        rec.scene = r.scene;
        rec.visual_seed = r.visual_seed;
        rec.prompt = r.prompt;
        rec.chosen = r.chosen;
        rec.rejected = std::move(selected);
        out.dataset.records.push_back(std::move(rec));
    }
    ensure(!out.dataset.records.empty(),
           "rerank: no record kept at least two gap-separated candidates");
    return out;
}

TrainResult pipeline_train(const AppConfig& config, const ModelParams& reference,
                           const RankedDataset& dataset) {
    TrainConfig tc = config.train;
    tc.seed = config.seed;
    tc.noise_std = config.corpus.noise_std;
    return train(reference, reference, dataset.records, tc);
}

}  // namespace hscr
