#pragma once

#include <cstdint>
#include <vector>

#include "hscr/model.hpp"

namespace hscr {

struct CorpusSpec {
    int64_t num_records = 2000;
    int32_t attribute_count = 4;       // fixed at 4 in this artifact
    int32_t values_per_attribute = 8;  // scene values drawn from [0, this)
    double closed_ended_fraction = 0.5;
    double noise_std = 0.0;
    uint64_t seed = 1;
    void validate() const;
};

struct CorpusEntry {
    int64_t id = 0;
    Scene scene;
    uint64_t visual_seed = 0;
    bool closed = false;
    std::vector<int32_t> prompt;
    std::vector<int32_t> chosen;
};

// Feature grid for a scene: each row r carries the value code of attribute
// r mod 4 (orthonormal 8-dim codes) plus seeded Gaussian noise.
VisualInput visual_features(const Scene& scene, uint64_t seed, double noise_std,
                            const ModelDims& dims);

// Synthetic grounded-captioning corpus. Closed entries ask "is <attr>
// <val>?" with balanced yes/no; open entries ask "what is <attr>?". The
// reference answer leads with the answer token and restates the whole scene
// so candidate corruptions land at graded similarity levels.
std::vector<CorpusEntry> make_corpus(const CorpusSpec& spec);

std::vector<SftExample> to_sft_examples(const std::vector<CorpusEntry>& corpus,
                                        const ModelDims& dims, double noise_std);

}  // namespace hscr
