#include "hscr/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hscr/common.hpp"
#include "hscr/rng.hpp"

namespace hscr {

using nlohmann::json;

void AppConfig::validate() const {
    model.validate();
    corpus.validate();
    require(heldout_records >= 1, "config: heldout_records must be >= 1");
    require(sft.epochs >= 1 && sft.batch_size >= 1 && sft.learning_rate > 0,
            "config: invalid sft section");
    require(gen.k >= 2 && gen.n >= 1 && gen.beta >= 0.0, "config: invalid gen section");
    require(gen.mask_ratio >= 0.0 && gen.mask_ratio <= 1.0,
            "config: mask_ratio must lie in [0,1]");
    mask_strategy_from_string(gen.mask_strategy);
    require(!gen.sampled_mode, "config: sampled_mode is reserved and must stay false");
    require(rerank_j >= 2, "config: rerank j must be >= 2");
    // Ranked files promise adjacent similarity gaps of at least 0.1, so the
    // pipeline never runs with a smaller gap (the rerank op itself is more
    // permissive for direct callers).
    require(rerank_gap >= 0.1, "config: rerank gap must be >= 0.1");
    train.validate();
    require(gradcheck.step > 0 && gradcheck.tolerance > 0,
            "config: invalid gradcheck section");
    require(!ablation.seeds.empty(), "config: ablation needs at least one seed");
}

CorpusSpec AppConfig::train_corpus_spec() const {
    CorpusSpec s = corpus;
    s.seed = Rng::mix(seed, 0x74726E63ULL);
    return s;
}

CorpusSpec AppConfig::heldout_corpus_spec() const {
    CorpusSpec s = corpus;
    s.num_records = heldout_records;
    s.seed = Rng::mix(seed, 0x68656C64ULL);
    return s;
}

AppConfig default_config() {
    AppConfig c;
    c.corpus.num_records = 2000;
    c.sft = SftConfig{};
    c.gen = GenConfig{};
    c.train = TrainConfig{};
    return c;
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

AppConfig config_from_json(const json& j) {
    require(j.is_object(), "config: top level must be a JSON object");
    AppConfig c = default_config();
    read_field(j, "seed", c.seed);
    if (j.contains("model")) {
        const json& m = j.at("model");
        read_field(m, "vocab", c.model.vocab);
        read_field(m, "embed", c.model.embed);
        read_field(m, "visual_rows", c.model.visual_rows);
        read_field(m, "visual_dim", c.model.visual_dim);
        read_field(m, "max_text", c.model.max_text);
    }
    if (j.contains("corpus")) {
        const json& m = j.at("corpus");
        read_field(m, "num_records", c.corpus.num_records);
        read_field(m, "attribute_count", c.corpus.attribute_count);
        read_field(m, "values_per_attribute", c.corpus.values_per_attribute);
        read_field(m, "closed_ended_fraction", c.corpus.closed_ended_fraction);
        read_field(m, "noise_std", c.corpus.noise_std);
    }
    read_field(j, "heldout_records", c.heldout_records);
    if (j.contains("sft")) {
        const json& m = j.at("sft");
        read_field(m, "epochs", c.sft.epochs);
        read_field(m, "batch_size", c.sft.batch_size);
        read_field(m, "learning_rate", c.sft.learning_rate);
    }
    if (j.contains("prefgen")) {
        const json& m = j.at("prefgen");
        read_field(m, "k", c.gen.k);
        read_field(m, "beta", c.gen.beta);
        read_field(m, "n", c.gen.n);
        read_field(m, "mask_strategy", c.gen.mask_strategy);
        read_field(m, "mask_ratio", c.gen.mask_ratio);
        read_field(m, "sampled_mode", c.gen.sampled_mode);
    }
    if (j.contains("rerank")) {
        const json& m = j.at("rerank");
        read_field(m, "j", c.rerank_j);
        read_field(m, "gap", c.rerank_gap);
    }
    if (j.contains("train")) {
        const json& m = j.at("train");
        std::string mode = to_string(c.train.loss_mode);
        read_field(m, "loss_mode", mode);
        c.train.loss_mode = loss_mode_from_string(mode);
        read_field(m, "gamma", c.train.gamma);
        read_field(m, "learning_rate", c.train.learning_rate);
        read_field(m, "epochs", c.train.epochs);
        read_field(m, "batch_size", c.train.batch_size);
    }
    if (j.contains("gradcheck")) {
        const json& m = j.at("gradcheck");
        read_field(m, "step", c.gradcheck.step);
        read_field(m, "tolerance", c.gradcheck.tolerance);
    }
    if (j.contains("ablation")) {
        const json& m = j.at("ablation");
        read_field(m, "seeds", c.ablation.seeds);
    }
    // Derived wiring: the visual noise level is a corpus property.
    c.gen.noise_std = c.corpus.noise_std;
    c.train.noise_std = c.corpus.noise_std;
    c.gen.seed = c.seed;
    c.validate();
    return c;
}

AppConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), "config: cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

json config_to_json(const AppConfig& c) {
    return json{
        {"seed", c.seed},
        {"model",
         {{"vocab", c.model.vocab},
          {"embed", c.model.embed},
          {"visual_rows", c.model.visual_rows},
          {"visual_dim", c.model.visual_dim},
          {"max_text", c.model.max_text}}},
        {"corpus",
         {{"num_records", c.corpus.num_records},
          {"attribute_count", c.corpus.attribute_count},
          {"values_per_attribute", c.corpus.values_per_attribute},
          {"closed_ended_fraction", c.corpus.closed_ended_fraction},
          {"noise_std", c.corpus.noise_std}}},
        {"heldout_records", c.heldout_records},
        {"sft",
         {{"epochs", c.sft.epochs},
          {"batch_size", c.sft.batch_size},
          {"learning_rate", c.sft.learning_rate}}},
        {"prefgen",
         {{"k", c.gen.k},
          {"beta", c.gen.beta},
          {"n", c.gen.n},
          {"mask_strategy", c.gen.mask_strategy},
          {"mask_ratio", c.gen.mask_ratio},
          {"sampled_mode", c.gen.sampled_mode}}},
        {"rerank", {{"j", c.rerank_j}, {"gap", c.rerank_gap}}},
        {"train",
         {{"loss_mode", to_string(c.train.loss_mode)},
          {"gamma", c.train.gamma},
          {"learning_rate", c.train.learning_rate},
          {"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size}}},
        {"gradcheck", {{"step", c.gradcheck.step}, {"tolerance", c.gradcheck.tolerance}}},
        {"ablation", {{"seeds", c.ablation.seeds}}},
    };
}

std::string config_hash(const AppConfig& c) {
    const std::string s = config_to_json(c).dump();
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

}  // namespace hscr
