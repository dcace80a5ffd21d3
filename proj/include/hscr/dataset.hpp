#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hscr/mlpo.hpp"
#include "hscr/prefgen.hpp"

namespace hscr {

// File-level metadata; identical across every line of a dataset file.
struct DatasetMeta {
    double beta = 0.9;
    std::string mask_strategy = "token";
    double mask_ratio = 0.7;
    int64_t n = 10;
    uint64_t seed = 0;
    std::string pipeline_version;
    bool operator==(const DatasetMeta&) const = default;
};

struct RawDataset {
    DatasetMeta meta;
    std::vector<RawRecord> records;
};

struct RankedDataset {
    DatasetMeta meta;
    std::vector<PreferenceRecord> records;
};

// JSONL, one record per line. Writes are atomic (temp file + rename), and
// reads validate every record invariant, rejecting violations with the
// offending line number.
void write_raw_dataset(const std::string& path, const RawDataset& dataset);
RawDataset read_raw_dataset(const std::string& path);

void write_ranked_dataset(const std::string& path, const RankedDataset& dataset);
RankedDataset read_ranked_dataset(const std::string& path);

// Atomic text write used for every report and manifest in the pipeline.
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace hscr
