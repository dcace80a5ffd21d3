// Python surface over the core operations: softmax/log-sigmoid kernels, the
// contrastive distribution, similarity re-ranking, the toy VLM and the
// preference losses.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "hscr/common.hpp"
#include "hscr/corpus.hpp"
#include "hscr/mlpo.hpp"
#include "hscr/model.hpp"
#include "hscr/prefgen.hpp"
#include "hscr/rerank.hpp"
#include "hscr/tensor.hpp"
#include "hscr/vocab.hpp"

namespace py = pybind11;
using namespace hscr;

namespace {

Tensor matrix_from_rows(const std::vector<std::vector<double>>& rows, const char* what) {
    require(!rows.empty(), std::string(what) + ": empty matrix");
    const int64_t cols = static_cast<int64_t>(rows.front().size());
    Tensor t = Tensor::zeros({static_cast<int64_t>(rows.size()), cols});
    for (size_t r = 0; r < rows.size(); ++r) {
        require(static_cast<int64_t>(rows[r].size()) == cols,
                std::string(what) + ": ragged rows");
        for (int64_t c = 0; c < cols; ++c) t.at(static_cast<int64_t>(r), c) = rows[r][c];
    }
    return t;
}

std::vector<std::vector<double>> rows_from_matrix(const Tensor& t) {
    std::vector<std::vector<double>> rows(static_cast<size_t>(t.rows()));
    for (int64_t r = 0; r < t.rows(); ++r) {
        rows[static_cast<size_t>(r)].resize(static_cast<size_t>(t.cols()));
        for (int64_t c = 0; c < t.cols(); ++c)
            rows[static_cast<size_t>(r)][static_cast<size_t>(c)] = t.at(r, c);
    }
    return rows;
}

VisualInput visual_from_rows(const std::vector<std::vector<double>>& rows) {
    VisualInput v;
    v.features = matrix_from_rows(rows, "visual features");
    return v;
}

std::optional<MaskSpec> mask_from_args(const std::string& strategy, double ratio,
                                       uint64_t seed) {
    if (strategy.empty()) return std::nullopt;
    return MaskSpec{mask_strategy_from_string(strategy), ratio, seed};
}

PreferenceRecord record_from_args(const std::vector<int32_t>& prompt,
                                  const std::vector<int32_t>& chosen,
                                  const std::vector<std::vector<int32_t>>& rejected) {
    PreferenceRecord r;
    r.prompt = prompt;
    r.chosen = chosen;
    for (size_t i = 0; i < rejected.size(); ++i)
        r.rejected.push_back({rejected[i], 0.0, static_cast<int32_t>(i + 1)});
    return r;
}

}  // namespace

PYBIND11_MODULE(_hscr, m) {
    m.doc() = "self-contrastive preference pipeline core";
    m.attr("__version__") = "0.1.0";
    m.attr("VOCAB_SIZE") = vocab::kVocabSize;
    m.attr("BOS") = vocab::BOS;
    m.attr("EOS") = vocab::EOS;

    m.def("softmax",
          [](const std::vector<double>& x) { return softmax(x); },
          py::arg("logits"), "numerically stable softmax of a vector");
    m.def("log_sigmoid", &log_sigmoid, py::arg("x"));
    m.def("token_name", &vocab::token_name, py::arg("token"));

    m.def(
        "contrast_distribution",
        [](const std::vector<std::vector<double>>& full,
           const std::vector<std::vector<double>>& masked,
           const std::vector<int32_t>& response, double beta) {
            const DiffDistribution d =
                diff_distribution(matrix_from_rows(full, "full logits"),
                                  matrix_from_rows(masked, "masked logits"), response,
                                  beta);
            return py::make_tuple(d.p_diff, d.delta);
        },
        py::arg("logits_full"), py::arg("logits_masked"), py::arg("response"),
        py::arg("beta"),
        "per-position contrastive distribution and ground-truth logit shifts");

    m.def("similarity", &similarity, py::arg("a"), py::arg("b"),
          "multiset Dice similarity over non-special tokens");

    m.def(
        "rerank_select",
        [](const std::vector<int32_t>& chosen,
           const std::vector<std::vector<int32_t>>& candidates, int64_t j, double gap) {
            py::list out;
            for (const RankedCandidate& rc : rerank_and_select(chosen, candidates, j, gap)) {
                py::dict d;
                d["tokens"] = rc.tokens;
                d["similarity"] = rc.similarity;
                d["rank"] = rc.rank;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("chosen"), py::arg("candidates"), py::arg("j") = 3,
        py::arg("gap") = 0.1);

    m.def(
        "visual_features",
        [](const std::vector<int32_t>& scene, uint64_t seed, double noise_std) {
            require(scene.size() == 4, "scene must have 4 attributes");
            Scene s;
            std::copy(scene.begin(), scene.end(), s.attributes.begin());
            return rows_from_matrix(
                hscr::visual_features(s, seed, noise_std, ModelDims{}).features);
        },
        py::arg("scene"), py::arg("seed") = 0, py::arg("noise_std") = 0.05);

    m.def(
        "make_corpus",
        [](int64_t num_records, double closed_ended_fraction, double noise_std,
           uint64_t seed) {
            CorpusSpec spec;
            spec.num_records = num_records;
            spec.closed_ended_fraction = closed_ended_fraction;
            spec.noise_std = noise_std;
            spec.seed = seed;
            py::list out;
            for (const CorpusEntry& e : hscr::make_corpus(spec)) {
                py::dict d;
                d["id"] = e.id;
                d["scene"] = std::vector<int32_t>(e.scene.attributes.begin(),
                                                  e.scene.attributes.end());
                d["visual_seed"] = e.visual_seed;
                d["closed"] = e.closed;
                d["prompt"] = e.prompt;
                d["chosen"] = e.chosen;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("num_records"), py::arg("closed_ended_fraction") = 0.5,
        py::arg("noise_std") = 0.05, py::arg("seed") = 1);

    py::class_<ModelParams>(m, "Model")
        .def_static(
            "init_random",
            [](uint64_t seed, double init_std) {
                return ModelParams::init(ModelDims{}, seed, init_std);
            },
            py::arg("seed") = 1, py::arg("init_std") = 0.08)
        .def_static("load", &load_checkpoint, py::arg("path"))
        .def("save",
             [](const ModelParams& m_, const std::string& path) {
                 save_checkpoint(path, m_);
             },
             py::arg("path"))
        .def_property_readonly("parameter_count", &ModelParams::parameter_count)
        .def(
            "encode_visual",
            [](const ModelParams& m_, const std::vector<std::vector<double>>& features,
               const std::string& mask_strategy, double mask_ratio, uint64_t mask_seed) {
                return rows_from_matrix(
                    encode_visual(m_, visual_from_rows(features),
                                  mask_from_args(mask_strategy, mask_ratio, mask_seed)));
            },
            py::arg("features"), py::arg("mask_strategy") = "",
            py::arg("mask_ratio") = 0.7, py::arg("mask_seed") = 0)
        .def(
            "logits",
            [](const ModelParams& m_, const std::vector<std::vector<double>>& features,
               const std::vector<int32_t>& text) {
                return rows_from_matrix(
                    forward_logits(m_, visual_from_rows(features), text));
            },
            py::arg("features"), py::arg("text"),
            "teacher-forced next-token logits, one row per text position")
        .def(
            "sequence_logprob",
            [](const ModelParams& m_, const std::vector<std::vector<double>>& features,
               const std::vector<int32_t>& prompt, const std::vector<int32_t>& response) {
                return sequence_logprob(m_, visual_from_rows(features), prompt, response);
            },
            py::arg("features"), py::arg("prompt"), py::arg("response"))
        .def(
            "greedy_decode",
            [](const ModelParams& m_, const std::vector<std::vector<double>>& features,
               const std::vector<int32_t>& prompt, int64_t max_len) {
                return greedy_decode(m_, visual_from_rows(features), prompt, max_len);
            },
            py::arg("features"), py::arg("prompt"), py::arg("max_len") = 20);

    m.def(
        "sft_train",
        [](const ModelParams& initial, const py::list& corpus, int64_t epochs,
           int64_t batch_size, double learning_rate, uint64_t seed, double noise_std) {
            std::vector<SftExample> examples;
            for (const auto& item : corpus) {
                const py::dict d = item.cast<py::dict>();
                const auto scene_vec = d["scene"].cast<std::vector<int32_t>>();
                Scene s;
                std::copy(scene_vec.begin(), scene_vec.end(), s.attributes.begin());
                SftExample ex;
                ex.visual = hscr::visual_features(s, d["visual_seed"].cast<uint64_t>(),
                                                  noise_std, initial.dims);
                ex.prompt = d["prompt"].cast<std::vector<int32_t>>();
                ex.chosen = d["chosen"].cast<std::vector<int32_t>>();
                examples.push_back(std::move(ex));
            }
            SftConfig cfg{epochs, batch_size, learning_rate, seed};
            SftResult r = sft_train(initial, examples, cfg);
            return py::make_tuple(std::move(r.model), r.loss_curve);
        },
        py::arg("model"), py::arg("corpus"), py::arg("epochs") = 5,
        py::arg("batch_size") = 16, py::arg("learning_rate") = 1e-3,
        py::arg("seed") = 1, py::arg("noise_std") = 0.05);

    m.def(
        "generate_dispreferred",
        [](const ModelParams& reference, const std::vector<std::vector<double>>& features,
           const std::vector<int32_t>& prompt, const std::vector<int32_t>& chosen,
           int64_t k, double beta, int64_t n, const std::string& mask_strategy,
           double mask_ratio, uint64_t mask_seed) {
            const GenerationDetail d = hscr::generate_dispreferred(
                reference, visual_from_rows(features), prompt, chosen, k, beta, n,
                MaskSpec{mask_strategy_from_string(mask_strategy), mask_ratio, mask_seed});
            return py::make_tuple(d.variants, d.delta, d.sensitive);
        },
        py::arg("reference"), py::arg("features"), py::arg("prompt"), py::arg("chosen"),
        py::arg("k") = 4, py::arg("beta") = 0.9, py::arg("n") = 10,
        py::arg("mask_strategy") = "token", py::arg("mask_ratio") = 0.7,
        py::arg("mask_seed") = 0);

    m.def(
        "implicit_reward",
        [](const ModelParams& policy, const ModelParams& reference,
           const std::vector<std::vector<double>>& features,
           const std::vector<int32_t>& prompt, const std::vector<int32_t>& response,
           double gamma) {
            return implicit_reward(policy, reference, visual_from_rows(features), prompt,
                                   response, gamma);
        },
        py::arg("policy"), py::arg("reference"), py::arg("features"), py::arg("prompt"),
        py::arg("response"), py::arg("gamma") = 0.1);

    m.def(
        "dpo_pair_loss",
        [](const ModelParams& policy, const ModelParams& reference,
           const std::vector<std::vector<double>>& features,
           const std::vector<int32_t>& prompt, const std::vector<int32_t>& chosen,
           const std::vector<int32_t>& rejected, double gamma) {
            return dpo_pair_loss(policy, reference, visual_from_rows(features), prompt,
                                 chosen, rejected, gamma);
        },
        py::arg("policy"), py::arg("reference"), py::arg("features"), py::arg("prompt"),
        py::arg("chosen"), py::arg("rejected"), py::arg("gamma") = 0.1);

    m.def(
        "hscr_loss",
        [](const ModelParams& policy, const ModelParams& reference,
           const std::vector<std::vector<double>>& features,
           const std::vector<int32_t>& prompt, const std::vector<int32_t>& chosen,
           const std::vector<std::vector<int32_t>>& rejected, double gamma) {
            const LossBreakdown b =
                hscr_loss(policy, reference, visual_from_rows(features),
                          record_from_args(prompt, chosen, rejected), gamma);
            return py::make_tuple(b.total, b.explicit_part, b.implicit_part);
        },
        py::arg("policy"), py::arg("reference"), py::arg("features"), py::arg("prompt"),
        py::arg("chosen"), py::arg("rejected"), py::arg("gamma") = 0.1,
        "returns (total, explicit, implicit) loss parts");
}
