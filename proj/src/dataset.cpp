#include "hscr/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hscr/common.hpp"
#include "hscr/rerank.hpp"
#include "hscr/vocab.hpp"

namespace hscr {

using nlohmann::json;

namespace {

json meta_to_json(const DatasetMeta& m) {
    return json{{"beta", m.beta},
                {"mask_strategy", m.mask_strategy},
                {"mask_ratio", m.mask_ratio},
                {"n", m.n},
                {"seed", m.seed},
                {"pipeline_version", m.pipeline_version}};
}

DatasetMeta meta_from_json(const json& j) {
    DatasetMeta m;
    m.beta = j.at("beta").get<double>();
    m.mask_strategy = j.at("mask_strategy").get<std::string>();
    m.mask_ratio = j.at("mask_ratio").get<double>();
    m.n = j.at("n").get<int64_t>();
    m.seed = j.at("seed").get<uint64_t>();
    m.pipeline_version = j.at("pipeline_version").get<std::string>();
    return m;
}

json scene_to_json(const Scene& s) {
    return json(std::vector<int32_t>(s.attributes.begin(), s.attributes.end()));
}

Scene scene_from_json(const json& j) {
    const auto v = j.get<std::vector<int32_t>>();
    ensure(v.size() == 4, "dataset: scene must have 4 attributes");
    Scene s;
    std::copy(v.begin(), v.end(), s.attributes.begin());
    s.validate();
    return s;
}

void check_tokens(const std::vector<int32_t>& tokens, int64_t line) {
    ensure(!tokens.empty(), "dataset: empty token sequence at line " +
                                std::to_string(line));
    ensure(tokens.size() <= 24,
           "dataset: sequence exceeds T_max at line " + std::to_string(line));
    for (int32_t t : tokens)
        ensure(t >= 0 && t < vocab::kVocabSize,
               "dataset: token out of range at line " + std::to_string(line));
}

template <typename WriteLine>
void write_jsonl_atomic(const std::string& path, const WriteLine& writer) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        ensure(static_cast<bool>(out), "dataset: cannot open for write: " + tmp);
        writer(out);
        ensure(static_cast<bool>(out), "dataset: write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    ensure(!ec, "dataset: rename failed for " + path + ": " + ec.message());
}

json parse_line(const std::string& line, int64_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::exception& e) {
        throw std::runtime_error("dataset: parse error at line " +
                                 std::to_string(line_no) + ": " + e.what());
    }
}

}  // namespace

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        ensure(static_cast<bool>(out), "cannot open for write: " + tmp);
        out << content;
        ensure(static_cast<bool>(out), "write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    ensure(!ec, "rename failed for " + path + ": " + ec.message());
}

void write_raw_dataset(const std::string& path, const RawDataset& dataset) {
    write_jsonl_atomic(path, [&](std::ofstream& out) {
        const json meta = meta_to_json(dataset.meta);
        for (const RawRecord& r : dataset.records) {
            json line{{"id", r.id},
                      {"scene", scene_to_json(r.scene)},
                      {"visual_seed", r.visual_seed},
                      {"prompt_tokens", r.prompt},
                      {"chosen_tokens", r.chosen},
                      {"candidates", r.candidates},
                      {"meta", meta}};
            out << line.dump() << "\n";
        }
    });
}

RawDataset read_raw_dataset(const std::string& path) {
    std::ifstream in(path);
    ensure(static_cast<bool>(in), "dataset: cannot open: " + path);
    RawDataset dataset;
    std::string line;
    int64_t line_no = 0;
    int64_t last_id = -1;
    bool have_meta = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse_line(line, line_no);
        RawRecord r;
        r.id = j.at("id").get<int64_t>();
        ensure(r.id > last_id, "dataset: ids must increase at line " +
                                   std::to_string(line_no));
        last_id = r.id;
        r.scene = scene_from_json(j.at("scene"));
        r.visual_seed = j.at("visual_seed").get<uint64_t>();
        r.prompt = j.at("prompt_tokens").get<std::vector<int32_t>>();
        r.chosen = j.at("chosen_tokens").get<std::vector<int32_t>>();
        check_tokens(r.prompt, line_no);
        check_tokens(r.chosen, line_no);
        r.candidates = j.at("candidates").get<std::vector<std::vector<int32_t>>>();
        ensure(!r.candidates.empty(),
               "dataset: record without candidates at line " + std::to_string(line_no));
        for (const auto& c : r.candidates) check_tokens(c, line_no);
        const DatasetMeta meta = meta_from_json(j.at("meta"));
        if (!have_meta) {
            dataset.meta = meta;
            have_meta = true;
        } else {
            ensure(meta == dataset.meta,
                   "dataset: meta differs at line " + std::to_string(line_no));
        }
        dataset.records.push_back(std::move(r));
    }
    return dataset;
}

void write_ranked_dataset(const std::string& path, const RankedDataset& dataset) {
    write_jsonl_atomic(path, [&](std::ofstream& out) {
        const json meta = meta_to_json(dataset.meta);
        for (const PreferenceRecord& r : dataset.records) {
            json rejected = json::array();
            for (const RankedCandidate& rc : r.rejected)
                rejected.push_back({{"tokens", rc.tokens},
                                    {"similarity", rc.similarity},
                                    {"rank", rc.rank}});
            json line{{"id", r.id},
                      {"scene", scene_to_json(r.scene)},
                      {"visual_seed", r.visual_seed},
                      {"prompt_tokens", r.prompt},
                      {"chosen_tokens", r.chosen},
                      {"rejected", rejected},
                      {"meta", meta}};
            out << line.dump() << "\n";
        }
    });
}

RankedDataset read_ranked_dataset(const std::string& path) {
    std::ifstream in(path);
    ensure(static_cast<bool>(in), "dataset: cannot open: " + path);
    RankedDataset dataset;
    std::string line;
    int64_t line_no = 0;
    int64_t last_id = -1;
    bool have_meta = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json j = parse_line(line, line_no);
        PreferenceRecord r;
        r.id = j.at("id").get<int64_t>();
        ensure(r.id > last_id,
               "dataset: ids must increase at line " + std::to_string(line_no));
        last_id = r.id;
        r.scene = scene_from_json(j.at("scene"));
        r.visual_seed = j.at("visual_seed").get<uint64_t>();
        r.prompt = j.at("prompt_tokens").get<std::vector<int32_t>>();
        r.chosen = j.at("chosen_tokens").get<std::vector<int32_t>>();
        check_tokens(r.prompt, line_no);
        check_tokens(r.chosen, line_no);
        for (const json& rj : j.at("rejected")) {
            RankedCandidate rc;
            rc.tokens = rj.at("tokens").get<std::vector<int32_t>>();
            rc.similarity = rj.at("similarity").get<double>();
            rc.rank = rj.at("rank").get<int32_t>();
            check_tokens(rc.tokens, line_no);
            ensure(rc.similarity >= 0.0 && rc.similarity <= 1.0,
                   "dataset: similarity out of range at line " + std::to_string(line_no));
            r.rejected.push_back(std::move(rc));
        }
        ensure(r.rejected.size() >= 2,
               "dataset: fewer than two rejected candidates at line " +
                   std::to_string(line_no));
        for (size_t i = 0; i < r.rejected.size(); ++i) {
            ensure(r.rejected[i].rank == static_cast<int32_t>(i + 1),
                   "dataset: ranks must be 1..j at line " + std::to_string(line_no));
            if (i > 0) {
                const double gap =
                    r.rejected[i - 1].similarity - r.rejected[i].similarity;
                ensure(gap >= 0.1 - kGapSlack,
                       "dataset: adjacent similarity gap below 0.1 at line " +
                           std::to_string(line_no));
            }
            for (size_t m = i + 1; m < r.rejected.size(); ++m)
                ensure(r.rejected[i].tokens != r.rejected[m].tokens,
                       "dataset: duplicate rejected candidates at line " +
                           std::to_string(line_no));
        }
        const DatasetMeta meta = meta_from_json(j.at("meta"));
        if (!have_meta) {
            dataset.meta = meta;
            have_meta = true;
        } else {
            ensure(meta == dataset.meta,
                   "dataset: meta differs at line " + std::to_string(line_no));
        }
        dataset.records.push_back(std::move(r));
    }
    return dataset;
}

}  // namespace hscr
