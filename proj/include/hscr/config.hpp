#pragma once

#include <cstdint>
#include <string>

#include "hscr/corpus.hpp"
#include "hscr/mlpo.hpp"
#include "hscr/model.hpp"
#include "hscr/prefgen.hpp"

#include <nlohmann/json_fwd.hpp>

namespace hscr {

inline constexpr const char* kPipelineVersion = "hscr-0.1.0";

struct GradcheckConfig {
    double step = 1e-5;
    double tolerance = 1e-4;
    // Reduced dims keep the checked model under 5,000 parameters.
    ModelDims dims{.vocab = 16, .embed = 8, .visual_rows = 4, .visual_dim = 4,
                   .max_text = 12};
};

struct AblationConfig {
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
};

// One config file drives every subcommand; the global seed feeds each
// module's derived stream so a full pipeline is reproducible end to end.
struct AppConfig {
    uint64_t seed = 17;
    ModelDims model;
    CorpusSpec corpus;
    int64_t heldout_records = 400;
    SftConfig sft;
    GenConfig gen;
    int64_t rerank_j = 3;
    double rerank_gap = 0.1;
    TrainConfig train;
    GradcheckConfig gradcheck;
    AblationConfig ablation;

    void validate() const;
    // Derived corpus specs; the held-out stream is disjoint from training.
    CorpusSpec train_corpus_spec() const;
    CorpusSpec heldout_corpus_spec() const;
};

AppConfig default_config();
AppConfig load_config(const std::string& path);
AppConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const AppConfig& c);
// FNV-1a over the canonical serialized form; recorded in manifests.
std::string config_hash(const AppConfig& c);

}  // namespace hscr
