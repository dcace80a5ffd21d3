#include "hscr/corpus.hpp"

#include <cmath>

#include "hscr/common.hpp"
#include "hscr/rng.hpp"
#include "hscr/vocab.hpp"

namespace hscr {

namespace {

constexpr uint64_t kVisualStream = 0x76697375616C6673ULL;
constexpr uint64_t kCorpusStream = 0x636F72707573ULL;

// Fixed unit-norm code per (attribute, value) combination; a constant of the
// synthetic world, independent of any run seed. Built from Hadamard rows:
// an orthogonal tag per attribute plus a signed orthogonal pattern per
// value, so distinct combinations keep a dot-product margin (match 1.0 vs
// at most 0.5) while the energy stays spread across all eight dimensions.
const std::vector<std::vector<double>>& codebook() {
    static const std::vector<std::vector<double>> book = [] {
        constexpr int kDim = 8;
        auto hadamard = [](int row, int col) {
            return (__builtin_popcount(static_cast<unsigned>(row & col)) & 1) ? -1.0 : 1.0;
        };
        std::vector<std::vector<double>> codes;
        codes.reserve(vocab::kNumAttributes * vocab::kNumValues);
        const double scale = 1.0 / std::sqrt(2.0 * kDim);
        for (int a = 0; a < vocab::kNumAttributes; ++a) {
            for (int v = 0; v < vocab::kNumValues; ++v) {
                const double sign = v < 4 ? 1.0 : -1.0;
                std::vector<double> c(kDim);
                for (int d = 0; d < kDim; ++d)
                    c[static_cast<size_t>(d)] =
                        scale * (hadamard(a, d) + sign * hadamard(4 + (v % 4), d));
                codes.push_back(std::move(c));
            }
        }
        return codes;
    }();
    return book;
}

}  // namespace

void CorpusSpec::validate() const {
    require(num_records >= 1, "corpus: num_records must be >= 1");
    require(attribute_count == vocab::kNumAttributes,
            "corpus: attribute_count is fixed at 4");
    require(values_per_attribute >= 2 && values_per_attribute <= vocab::kNumValues,
            "corpus: values_per_attribute must lie in [2, 8]");
    require(closed_ended_fraction >= 0.0 && closed_ended_fraction <= 1.0,
            "corpus: closed_ended_fraction must lie in [0, 1]");
    require(noise_std >= 0.0, "corpus: noise_std must be >= 0");
}

VisualInput visual_features(const Scene& scene, uint64_t seed, double noise_std,
                            const ModelDims& dims) {
    scene.validate();
    Rng rng(Rng::mix(seed, kVisualStream));
    VisualInput v;
    v.features = Tensor::zeros({dims.visual_rows, dims.visual_dim});
    const auto& book = codebook();

    // Every row carries its own attribute's code plus a weaker bleed of a
    // neighboring attribute's code. The per-attribute evidence stays
    // unambiguous, but a reader that cannot fully separate the subspaces
    // hedges toward values that are true of some other attribute, which is
    // exactly the misbinding that visual masking later exposes.
    constexpr double kBleed = 0.35;
    for (int64_t r = 0; r < dims.visual_rows; ++r) {
        const int32_t attr = static_cast<int32_t>(r % vocab::kNumAttributes);
        const int32_t value = scene.attributes[static_cast<size_t>(attr)];
        const int32_t other =
            static_cast<int32_t>((attr + 1 + (r / vocab::kNumAttributes) % 3) %
                                 vocab::kNumAttributes);
        const int32_t other_value = scene.attributes[static_cast<size_t>(other)];
        const auto& code = book[static_cast<size_t>(attr * vocab::kNumValues + value)];
        const auto& alt =
            book[static_cast<size_t>(other * vocab::kNumValues + other_value)];
        for (int64_t j = 0; j < dims.visual_dim; ++j)
            v.features.at(r, j) = code[static_cast<size_t>(j % 8)] +
                                  kBleed * alt[static_cast<size_t>(j % 8)] +
                                  noise_std * rng.normal();
    }
    return v;
}

std::vector<CorpusEntry> make_corpus(const CorpusSpec& spec) {
    spec.validate();
    using namespace vocab;
    std::vector<CorpusEntry> corpus;
    corpus.reserve(static_cast<size_t>(spec.num_records));
    for (int64_t id = 0; id < spec.num_records; ++id) {
        Rng rng(Rng::mix(spec.seed, Rng::mix(kCorpusStream, static_cast<uint64_t>(id))));
        CorpusEntry e;
        e.id = id;
        for (auto& a : e.scene.attributes)
            a = static_cast<int32_t>(rng.below(static_cast<uint64_t>(spec.values_per_attribute)));
        e.visual_seed = Rng::mix(spec.seed, static_cast<uint64_t>(id) + 1);
        e.closed = rng.next_double() < spec.closed_ended_fraction;

        const auto asked = static_cast<int32_t>(rng.below(kNumAttributes));
        const int32_t truth = e.scene.attributes[static_cast<size_t>(asked)];
        if (e.closed) {
            // Balanced yes/no: half the probes use the true value, half a
            // uniformly chosen wrong one.
            int32_t probe = truth;
            if (rng.next_double() < 0.5 && spec.values_per_attribute > 1) {
                const auto shift = 1 + static_cast<int32_t>(rng.below(
                                           static_cast<uint64_t>(spec.values_per_attribute - 1)));
                probe = (truth + shift) % spec.values_per_attribute;
            }
            e.prompt = {BOS, Q_CLOSED, QMARK, probe_token(asked, probe)};
            e.chosen = {probe == truth ? YES : NO, SEP};
        } else {
            e.prompt = {BOS, Q_OPEN, QMARK, attr_token(asked)};
            e.chosen = {value_token(truth), SEP};
        }
        // Scene restatement in fixed attribute order; with equal-length
        // prompts this pins every caption slot to one sequence position,
        // which a single attention layer can route to.
        for (int32_t a = 0; a < kNumAttributes; ++a) {
            if (a > 0) e.chosen.push_back(SEP);
            e.chosen.push_back(attr_token(a));
            e.chosen.push_back(IS);
            e.chosen.push_back(value_token(e.scene.attributes[static_cast<size_t>(a)]));
        }
        e.chosen.push_back(EOS);
        corpus.push_back(std::move(e));
    }
    return corpus;
}

std::vector<SftExample> to_sft_examples(const std::vector<CorpusEntry>& corpus,
                                        const ModelDims& dims, double noise_std) {
    std::vector<SftExample> out;
    out.reserve(corpus.size());
    for (const CorpusEntry& e : corpus) {
        SftExample ex;
        ex.visual = visual_features(e.scene, e.visual_seed, noise_std, dims);
        ex.prompt = e.prompt;
        ex.chosen = e.chosen;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace hscr
