#include "hscr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>

#include "hscr/adam.hpp"
#include "hscr/common.hpp"
#include "hscr/rng.hpp"
#include "hscr/vocab.hpp"

namespace hscr {

namespace {

void validate_text(const std::vector<int32_t>& text, const ModelDims& dims,
                   const char* what) {
    require(!text.empty(), std::string(what) + ": empty sequence");
    require(static_cast<int64_t>(text.size()) <= dims.max_text,
            std::string(what) + ": sequence exceeds T_max");
    for (int32_t t : text)
        require(t >= 0 && t < dims.vocab, std::string(what) + ": token out of range");
}

std::shared_ptr<const AttnMask> causal_mask(int64_t n) {
    return std::make_shared<const AttnMask>(AttnMask::causal(n));
}

}  // namespace

void Scene::validate() const {
    for (int32_t a : attributes)
        require(a >= 0 && a < vocab::kNumValues, "scene attribute out of range");
}

void MaskSpec::validate() const {
    require(ratio >= 0.0 && ratio <= 1.0, "mask ratio must lie in [0,1]");
}

MaskStrategy mask_strategy_from_string(const std::string& s) {
    if (s == "pixel") return MaskStrategy::pixel;
    if (s == "patch") return MaskStrategy::patch;
    if (s == "latent") return MaskStrategy::latent;
    if (s == "token") return MaskStrategy::token;
    throw std::invalid_argument("unknown mask strategy: " + s);
}

std::string to_string(MaskStrategy s) {
    switch (s) {
        case MaskStrategy::pixel: return "pixel";
        case MaskStrategy::patch: return "patch";
        case MaskStrategy::latent: return "latent";
        case MaskStrategy::token: return "token";
    }
    return "?";
}

void ModelDims::validate() const {
    require(vocab > vocab::kNumSpecials && embed >= 1 && visual_rows >= 1 &&
                visual_dim >= 1 && max_text >= 2,
            "invalid model dimensions");
}

ModelParams ModelParams::init(const ModelDims& dims, uint64_t seed, double init_std) {
    dims.validate();
    ModelParams m;
    m.dims = dims;
    Rng rng(Rng::mix(seed, 0x6D6F64656C696E69ULL));
    auto make = [&](std::vector<int64_t> shape) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (double& v : t.data) v = init_std * rng.normal();
        return t;
    };
    m.token_emb = make({dims.vocab, dims.embed});
    m.visual_proj = make({dims.visual_dim, dims.embed});
    m.wq = make({dims.embed, dims.embed});
    m.wk = make({dims.embed, dims.embed});
    m.wv = make({dims.embed, dims.embed});
    m.wo = make({dims.embed, dims.embed});
    m.ffn_in = make({dims.embed, dims.ffn_hidden()});
    m.ffn_out = make({dims.ffn_hidden(), dims.embed});
    m.head = make({dims.embed, dims.vocab});
    m.pos_emb = make({dims.max_seq(), dims.embed});
    m.mask_emb = make({1, dims.embed});
    return m;
}

std::vector<Tensor*> ModelParams::parameters() {
    return {&token_emb, &visual_proj, &wq, &wk, &wv, &wo,
            &ffn_in, &ffn_out, &head, &pos_emb, &mask_emb};
}

std::vector<const Tensor*> ModelParams::parameters() const {
    return {&token_emb, &visual_proj, &wq, &wk, &wv, &wo,
            &ffn_in, &ffn_out, &head, &pos_emb, &mask_emb};
}

void ModelParams::set_requires_grad(bool v) {
    for (Tensor* t : parameters()) {
        t->requires_grad = v;
        if (!v) t->grad.clear();
    }
}

void ModelParams::zero_grads() {
    for (Tensor* t : parameters()) t->zero_grad();
}

int64_t ModelParams::parameter_count() const {
    int64_t n = 0;
    for (const Tensor* t : parameters()) n += t->numel();
    return n;
}

bool ModelParams::equals_bitwise(const ModelParams& other) const {
    auto a = parameters();
    auto b = other.parameters();
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i]->shape != b[i]->shape) return false;
        if (std::memcmp(a[i]->data.data(), b[i]->data.data(),
                        a[i]->data.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

bool ModelParams::all_finite() const {
    for (const Tensor* t : parameters())
        if (!t->all_finite()) return false;
    return true;
}

int64_t masked_unit_count(const MaskSpec& mask, const ModelDims& dims) {
    const int64_t units = mask.strategy == MaskStrategy::pixel
                              ? dims.visual_rows * dims.visual_dim
                              : dims.visual_rows;
    return static_cast<int64_t>(std::floor(mask.ratio * static_cast<double>(units) + 0.5));
}

std::vector<int64_t> masked_positions(const MaskSpec& mask, const ModelDims& dims) {
    mask.validate();
    const int64_t units = mask.strategy == MaskStrategy::pixel
                              ? dims.visual_rows * dims.visual_dim
                              : dims.visual_rows;
    Rng rng(Rng::mix(mask.seed, 0x6D61736B73656CULL));
    return sample_without_replacement(units, masked_unit_count(mask, dims), rng);
}

Tensor encoder_features(const ModelDims& dims, const VisualInput& input,
                        const std::optional<MaskSpec>& mask) {
    const int64_t M = dims.visual_rows, dv = dims.visual_dim;
    require(input.features.rows() == M && input.features.cols() == dv,
            "encode_visual: feature grid shape mismatch");

    Tensor e = input.features;
    std::vector<uint8_t> col_allowed(static_cast<size_t>(M), 1);
    if (mask) {
        const std::vector<int64_t> pos = masked_positions(*mask, dims);
        switch (mask->strategy) {
            case MaskStrategy::pixel:
                for (int64_t p : pos) e.data[static_cast<size_t>(p)] = 0.0;
                break;
            case MaskStrategy::patch:
                for (int64_t r : pos)
                    for (int64_t j = 0; j < dv; ++j) e.at(r, j) = 0.0;
                break;
            case MaskStrategy::latent:
                for (int64_t r : pos) col_allowed[static_cast<size_t>(r)] = 0;
                break;
            case MaskStrategy::token:
                break;  // applied after projection
        }
    }

    // Parameter-free self-attention over feature rows with a residual path.
    // Latent masking removes columns (keys) here; a fully masked row set
    // degrades to the residual alone.
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dv));
    Tensor out = e;
    for (int64_t i = 0; i < M; ++i) {
        std::vector<double> scores(static_cast<size_t>(M));
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t j = 0; j < M; ++j) {
            if (!col_allowed[static_cast<size_t>(j)]) continue;
            double s = 0.0;
            for (int64_t kk = 0; kk < dv; ++kk) s += e.at(i, kk) * e.at(j, kk);
            scores[static_cast<size_t>(j)] = s * inv_sqrt;
            mx = std::max(mx, scores[static_cast<size_t>(j)]);
        }
        if (!std::isfinite(mx)) continue;
        double denom = 0.0;
        for (int64_t j = 0; j < M; ++j) {
            if (!col_allowed[static_cast<size_t>(j)]) continue;
            scores[static_cast<size_t>(j)] = std::exp(scores[static_cast<size_t>(j)] - mx);
            denom += scores[static_cast<size_t>(j)];
        }
        for (int64_t j = 0; j < M; ++j) {
            if (!col_allowed[static_cast<size_t>(j)]) continue;
            const double w = scores[static_cast<size_t>(j)] / denom;
            for (int64_t kk = 0; kk < dv; ++kk) out.at(i, kk) += w * e.at(j, kk);
        }
    }
    return out;
}

Graph::Id build_visual_tokens(Graph& g, ModelParams& model, const VisualInput& input,
                              const std::optional<MaskSpec>& mask) {
    Tensor enc = encoder_features(model.dims, input, mask);
    Graph::Id projected = g.matmul(g.constant(std::move(enc)), g.leaf(model.visual_proj));
    if (mask && mask->strategy == MaskStrategy::token) {
        std::vector<int64_t> rows = masked_positions(*mask, model.dims);
        if (!rows.empty()) {
            Tensor row = model.mask_emb;
            row.requires_grad = false;
            row.grad.clear();
            projected = g.replace_rows(projected, std::move(rows), std::move(row));
        }
    }
    return projected;
}

Tensor encode_visual(const ModelParams& model, const VisualInput& input,
                     const std::optional<MaskSpec>& mask) {
    Graph g;
    // The frozen view never accumulates gradients through this path.
    ModelParams& m = const_cast<ModelParams&>(model);
    return g.value(build_visual_tokens(g, m, input, mask));
}

namespace {

// Shared trunk: hidden states for the concatenated [visual | text] sequence.
Graph::Id build_hidden(Graph& g, ModelParams& model, Graph::Id visual_tokens,
                       const std::vector<int32_t>& text) {
    const ModelDims& d = model.dims;
    const int64_t M = d.visual_rows;
    const int64_t L = static_cast<int64_t>(text.size());
    const int64_t S = M + L;

    std::vector<int64_t> tok_idx(text.begin(), text.end());
    Graph::Id emb = g.gather_rows(g.leaf(model.token_emb), std::move(tok_idx));
    Graph::Id x = g.concat_rows(visual_tokens, emb);

    std::vector<int64_t> pos_idx(static_cast<size_t>(S));
    for (int64_t i = 0; i < S; ++i) pos_idx[static_cast<size_t>(i)] = i;
    x = g.add(x, g.gather_rows(g.leaf(model.pos_emb), std::move(pos_idx)));

    Graph::Id q = g.matmul(x, g.leaf(model.wq));
    Graph::Id k = g.matmul(x, g.leaf(model.wk));
    Graph::Id v = g.matmul(x, g.leaf(model.wv));
    Graph::Id att = g.masked_softmax(
        g.scale(g.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d.embed))),
        causal_mask(S));
    x = g.add(x, g.matmul(g.matmul(att, v), g.leaf(model.wo)));
    x = g.add(x, g.matmul(g.gelu(g.matmul(x, g.leaf(model.ffn_in))),
                          g.leaf(model.ffn_out)));
    return x;
}

}  // namespace

Graph::Id build_forward_logits(Graph& g, ModelParams& model, Graph::Id visual_tokens,
                               const std::vector<int32_t>& text) {
    validate_text(text, model.dims, "forward_logits");
    require(text.front() == vocab::BOS, "forward_logits: text must begin with BOS");
    const int64_t M = model.dims.visual_rows;
    const int64_t L = static_cast<int64_t>(text.size());
    Graph::Id h = build_hidden(g, model, visual_tokens, text);
    // Row M-1+t of the trunk sees visual tokens and text tokens < t, so it
    // carries the logits for predicting text position t.
    Graph::Id h_pred = g.slice_rows(h, M - 1, L);
    return g.matmul(h_pred, g.leaf(model.head));
}

Tensor forward_logits(const ModelParams& model, const VisualInput& input,
                      const std::vector<int32_t>& text,
                      const std::optional<MaskSpec>& mask) {
    Graph g;
    ModelParams& m = const_cast<ModelParams&>(model);
    return g.value(build_forward_logits(g, m, build_visual_tokens(g, m, input, mask), text));
}

Graph::Id build_sequence_logprob(Graph& g, ModelParams& model, const VisualInput& input,
                                 const std::vector<int32_t>& prompt,
                                 const std::vector<int32_t>& response) {
    require(!response.empty(), "sequence_logprob: empty response");
    require(!prompt.empty() && prompt.front() == vocab::BOS,
            "sequence_logprob: prompt must begin with BOS");
    std::vector<int32_t> text = prompt;
    text.insert(text.end(), response.begin(), response.end());
    validate_text(text, model.dims, "sequence_logprob");

    const int64_t M = model.dims.visual_rows;
    const int64_t P = static_cast<int64_t>(prompt.size());
    const int64_t R = static_cast<int64_t>(response.size());
    Graph::Id h = build_hidden(g, model, build_visual_tokens(g, model, input, std::nullopt),
                               text);
    Graph::Id logits = g.matmul(g.slice_rows(h, M - 1 + P, R), g.leaf(model.head));
    Graph::Id logprobs = g.log_softmax_rows(logits);
    std::vector<std::pair<int64_t, int64_t>> picks;
    picks.reserve(static_cast<size_t>(R));
    for (int64_t i = 0; i < R; ++i) picks.emplace_back(i, response[static_cast<size_t>(i)]);
    return g.pick_sum(logprobs, std::move(picks));
}

double sequence_logprob(const ModelParams& model, const VisualInput& input,
                        const std::vector<int32_t>& prompt,
                        const std::vector<int32_t>& response) {
    Graph g;
    ModelParams& m = const_cast<ModelParams&>(model);
    return g.scalar_value(build_sequence_logprob(g, m, input, prompt, response));
}

std::vector<int32_t> greedy_decode(const ModelParams& model, const VisualInput& input,
                                   const std::vector<int32_t>& prompt, int64_t max_len) {
    require(max_len >= 0 && max_len <= model.dims.max_text,
            "greedy_decode: max_len out of range");
    require(!prompt.empty() && prompt.front() == vocab::BOS,
            "greedy_decode: prompt must begin with BOS");
    ModelParams& m = const_cast<ModelParams&>(model);
    const int64_t M = model.dims.visual_rows;

    std::vector<int32_t> text = prompt;
    std::vector<int32_t> response;
    while (static_cast<int64_t>(response.size()) < max_len &&
           static_cast<int64_t>(text.size()) < model.dims.max_text) {
        Graph g;
        Graph::Id h = build_hidden(g, m, build_visual_tokens(g, m, input, std::nullopt),
                                   text);
        const int64_t last = M + static_cast<int64_t>(text.size()) - 1;
        const Tensor& logits = g.value(g.matmul(g.slice_rows(h, last, 1), g.leaf(m.head)));
        int32_t best = 0;
        for (int64_t t = 1; t < model.dims.vocab; ++t)
            if (logits.data[static_cast<size_t>(t)] > logits.data[static_cast<size_t>(best)])
                best = static_cast<int32_t>(t);
        if (best == vocab::EOS) break;
        response.push_back(best);
        text.push_back(best);
    }
    return response;
}

SftResult sft_train(const ModelParams& initial, const std::vector<SftExample>& corpus,
                    const SftConfig& config) {
    require(!corpus.empty(), "sft_train: empty corpus");
    require(config.epochs >= 1 && config.batch_size >= 1, "sft_train: bad config");

    ModelParams model = initial;
    model.set_requires_grad(true);
    Adam opt(model.parameters(), {.learning_rate = config.learning_rate});
    Rng shuffle_rng(Rng::mix(config.seed, 0x7366747368756666ULL));

    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    SftResult result;
    ModelParams last_good = model;
    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.cosine_decay) {
            const double t = static_cast<double>(epoch) /
                             static_cast<double>(std::max<int64_t>(1, config.epochs));
            opt.set_learning_rate(config.learning_rate * 0.5 *
                                  (1.0 + std::cos(3.14159265358979323846 * t)));
        }
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (size_t begin = 0; begin < order.size();
             begin += static_cast<size_t>(config.batch_size)) {
            const size_t end =
                std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
            Graph g;
            std::vector<Graph::Id> losses;
            for (size_t i = begin; i < end; ++i) {
                const SftExample& ex = corpus[order[i]];
                Graph::Id lp =
                    build_sequence_logprob(g, model, ex.visual, ex.prompt, ex.chosen);
                losses.push_back(
                    g.scale(g.neg(lp), 1.0 / static_cast<double>(ex.chosen.size())));
            }
            Graph::Id batch_loss =
                g.scale(g.add_n(losses), 1.0 / static_cast<double>(losses.size()));
            const double loss_value = g.scalar_value(batch_loss);
            if (!std::isfinite(loss_value))
                throw TrainingDiverged("sft_train: non-finite loss", std::move(last_good));
            model.zero_grads();
            g.backward(batch_loss);
            opt.step();
            if (!model.all_finite())
                throw TrainingDiverged("sft_train: non-finite parameters",
                                       std::move(last_good));
            last_good = model;
            epoch_loss += loss_value * static_cast<double>(end - begin);
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(corpus.size()));
    }
    model.set_requires_grad(false);
    result.model = std::move(model);
    return result;
}

// --- checkpoint io ----------------------------------------------------------

namespace {

constexpr uint32_t kMagic = 0x48534352;  // "HSCR"
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    ensure(static_cast<bool>(in), "checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    ensure(static_cast<bool>(out), "checkpoint: cannot open for write: " + path);
    write_pod(out, kMagic);
    write_pod(out, kFormatVersion);
    write_pod(out, model.dims.vocab);
    write_pod(out, model.dims.embed);
    write_pod(out, model.dims.visual_rows);
    write_pod(out, model.dims.visual_dim);
    write_pod(out, model.dims.max_text);
    for (const Tensor* t : model.parameters()) {
        write_pod(out, static_cast<uint32_t>(t->shape.size()));
        for (int64_t d : t->shape) write_pod(out, d);
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    }
    ensure(static_cast<bool>(out), "checkpoint: write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    ensure(static_cast<bool>(in), "checkpoint: cannot open: " + path);
    ensure(read_pod<uint32_t>(in) == kMagic, "checkpoint: bad magic");
    ensure(read_pod<uint32_t>(in) == kFormatVersion, "checkpoint: unsupported version");
    ModelDims dims;
    dims.vocab = read_pod<int64_t>(in);
    dims.embed = read_pod<int64_t>(in);
    dims.visual_rows = read_pod<int64_t>(in);
    dims.visual_dim = read_pod<int64_t>(in);
    dims.max_text = read_pod<int64_t>(in);
    dims.validate();
    ModelParams model = ModelParams::init(dims, 0, 0.0);
    for (Tensor* t : model.parameters()) {
        const auto rank = read_pod<uint32_t>(in);
        ensure(rank == t->shape.size(), "checkpoint: rank mismatch");
        for (int64_t& d : t->shape) {
            const auto stored = read_pod<int64_t>(in);
            ensure(stored == d, "checkpoint: shape mismatch");
        }
        in.read(reinterpret_cast<char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(double)));
        ensure(static_cast<bool>(in), "checkpoint: truncated tensor data");
    }
    char extra;
    ensure(!in.read(&extra, 1), "checkpoint: trailing bytes");
    return model;
}

}  // namespace hscr
