#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hscr/graph.hpp"
#include "hscr/tensor.hpp"

namespace hscr {

// Latent ground truth behind a synthetic "image": four attributes, each
// taking one of eight values.
struct Scene {
    std::array<int32_t, 4> attributes{};
    void validate() const;
};

// M x d_v feature grid deterministically derived from a Scene plus seeded
// noise (see corpus.hpp for the derivation).
struct VisualInput {
    Tensor features;  // visual_rows x visual_dim
};

enum class MaskStrategy { pixel, patch, latent, token };

struct MaskSpec {
    MaskStrategy strategy = MaskStrategy::token;
    double ratio = 0.7;
    uint64_t seed = 0;
    void validate() const;
};

MaskStrategy mask_strategy_from_string(const std::string& s);
std::string to_string(MaskStrategy s);

enum class Role { prompt, chosen, rejected };

struct TokenSequence {
    std::vector<int32_t> tokens;
    Role role = Role::prompt;
};

struct ModelDims {
    int64_t vocab = 64;
    int64_t embed = 32;
    int64_t visual_rows = 16;   // M
    int64_t visual_dim = 8;     // d_v
    int64_t max_text = 24;      // T_max
    int64_t ffn_hidden() const { return 2 * embed; }
    int64_t max_seq() const { return visual_rows + max_text; }
    void validate() const;
};

// The toy VLM: visual projection + one single-head causal attention block +
// feed-forward + tied-nothing output head, all bias-free. A frozen copy
// (requires_grad off everywhere) serves as the reference policy.
struct ModelParams {
    ModelDims dims;
    Tensor token_emb;    // V x d
    Tensor visual_proj;  // d_v x d
    Tensor wq, wk, wv, wo;  // d x d each
    Tensor ffn_in;       // d x 2d
    Tensor ffn_out;      // 2d x d
    Tensor head;         // d x V
    Tensor pos_emb;      // (M + T_max) x d
    Tensor mask_emb;     // 1 x d

    static ModelParams init(const ModelDims& dims, uint64_t seed, double init_std = 0.08);

    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    void set_requires_grad(bool v);
    void zero_grads();
    int64_t parameter_count() const;
    bool equals_bitwise(const ModelParams& other) const;
    bool all_finite() const;
};

// --- encoding & decoding ---------------------------------------------------

// Number of units masked by a strategy: floor(ratio * units + 0.5), where
// units is M*d_v for pixel masking and M otherwise.
int64_t masked_unit_count(const MaskSpec& mask, const ModelDims& dims);
std::vector<int64_t> masked_positions(const MaskSpec& mask, const ModelDims& dims);

// Raw feature stage: pixel/patch masking, then the parameter-free encoder
// self-attention over feature rows (where latent masking lands). Token
// masking happens after projection and is handled by the callers below.
Tensor encoder_features(const ModelDims& dims, const VisualInput& input,
                        const std::optional<MaskSpec>& mask);

// Projected visual tokens (M x d), with token-level masking applied when
// requested. Graph variant is differentiable w.r.t. the model parameters.
Graph::Id build_visual_tokens(Graph& g, ModelParams& model, const VisualInput& input,
                              const std::optional<MaskSpec>& mask);
Tensor encode_visual(const ModelParams& model, const VisualInput& input,
                     const std::optional<MaskSpec>& mask);

// Teacher-forced logits for every text position: row t is the next-token
// distribution conditioned on all visual tokens and text tokens < t. The
// text must start with BOS and fit within T_max.
Graph::Id build_forward_logits(Graph& g, ModelParams& model, Graph::Id visual_tokens,
                               const std::vector<int32_t>& text);
Tensor forward_logits(const ModelParams& model, const VisualInput& input,
                      const std::vector<int32_t>& text,
                      const std::optional<MaskSpec>& mask = std::nullopt);

// Sum of log softmax(logits_t)[response_t] over response positions only.
Graph::Id build_sequence_logprob(Graph& g, ModelParams& model, const VisualInput& input,
                                 const std::vector<int32_t>& prompt,
                                 const std::vector<int32_t>& response);
double sequence_logprob(const ModelParams& model, const VisualInput& input,
                        const std::vector<int32_t>& prompt,
                        const std::vector<int32_t>& response);

// Argmax decoding, ties toward the lower token index; stops at EOS (not
// included in the result) or after max_len tokens.
std::vector<int32_t> greedy_decode(const ModelParams& model, const VisualInput& input,
                                   const std::vector<int32_t>& prompt, int64_t max_len);

// --- SFT -------------------------------------------------------------------

struct SftExample {
    VisualInput visual;
    std::vector<int32_t> prompt;
    std::vector<int32_t> chosen;
};

struct SftConfig {
    int64_t epochs = 45;
    int64_t batch_size = 16;
    double learning_rate = 5e-3;
    bool cosine_decay = false;  // optional epoch-level cosine schedule
    uint64_t seed = 1;
};

struct SftResult {
    ModelParams model;
    std::vector<double> loss_curve;  // mean per-token cross-entropy per epoch
};

// Thrown when training hits a non-finite loss; carries the last finite state.
struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(std::string msg, ModelParams checkpoint)
        : std::runtime_error(std::move(msg)), last_checkpoint(std::move(checkpoint)) {}
    ModelParams last_checkpoint;
};

SftResult sft_train(const ModelParams& initial, const std::vector<SftExample>& corpus,
                    const SftConfig& config);

// --- checkpoint io ----------------------------------------------------------

// Flat binary dump with a dimensions header; load(save(m)) == m bitwise.
void save_checkpoint(const std::string& path, const ModelParams& model);
ModelParams load_checkpoint(const std::string& path);

}  // namespace hscr
