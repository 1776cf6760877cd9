#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vista {

struct SteeringVector;
struct SteeringConfig;

using TokenId = int32_t;

struct ModelConfig {
    int vocab_size = 0;
    int n_layers = 0;
    int n_heads = 0;
    int d_model = 0;
    int d_ff = 0;
    int max_seq = 0;
    uint64_t seed = 0;

    int d_head() const { return d_model / n_heads; }
    void validate() const; // throws on violated invariants
};

struct LayerWeights {
    std::vector<float> wq, wk, wv, wo;      // [d x d] row-major
    std::vector<float> norm1_g, norm2_g;    // [d]
    std::vector<float> ffn_w1;              // [d_ff x d]
    std::vector<float> ffn_b1;              // [d_ff]
    std::vector<float> ffn_w2;              // [d x d_ff]
};

// Frozen decoder-only transformer. Pre-norm blocks with an additive residual
// stream: h^l = h^{l-1} + a^l + m^l, where a^l is the attention output and
// m^l the FFN output. Layer 0 is the embedding stream (token/visual row plus
// position row). Immutable after load and shareable across threads.
struct Model {
    ModelConfig config;
    std::vector<float> tok_emb;   // [V x d]
    std::vector<float> pos_emb;   // [max_seq x d]
    std::vector<LayerWeights> layers;
    std::vector<float> final_norm_g; // [d]
    std::vector<float> head_t;    // [V x d]; archive stores "head" as [d x V]
    bool tied_head = false;

    std::span<const float> embedding_row(TokenId id) const {
        return {tok_emb.data() + static_cast<size_t>(id) * config.d_model,
                static_cast<size_t>(config.d_model)};
    }

    uint64_t parameter_checksum() const;
};

// Segmented prompt: system tokens, visual segment, query tokens, concatenated
// in that order. The visual segment is either vocabulary ids or raw
// d_model-wide embedding rows (vision-encoder stub output); both enter the
// stream at layer 0 identically.
struct PromptLayout {
    std::vector<TokenId> system_tokens;
    std::vector<TokenId> visual_tokens;
    std::vector<std::vector<float>> visual_rows;
    std::vector<TokenId> query_tokens;

    int length() const {
        return static_cast<int>(system_tokens.size() + visual_tokens.size() +
                                visual_rows.size() + query_tokens.size());
    }
    bool has_visual() const { return !visual_tokens.empty() || !visual_rows.empty(); }
    PromptLayout without_visual() const {
        return PromptLayout{system_tokens, {}, {}, query_tokens};
    }
    uint64_t content_hash() const;
};

// Per-step, per-layer hidden states. Level l=0 holds the embedding stream;
// levels 1..L the block outputs. When captured with components, the attention
// and FFN outputs satisfy h^l = h^{l-1} + a^l + m^l to accumulation tolerance.
// Traces captured under steering store post-injection streams and omit
// components (the renormalization breaks plain additivity).
struct ResidualTrace {
    int steps = 0;
    int n_layers = 0;
    int d_model = 0;
    bool has_components = false;
    std::vector<float> hidden; // [steps][n_layers+1][d]
    std::vector<float> attn;   // [steps][n_layers][d] when has_components
    std::vector<float> ffn;    // [steps][n_layers][d] when has_components

    std::span<const float> h(int t, int l) const {
        return {hidden.data() + (static_cast<size_t>(t) * (n_layers + 1) + l) * d_model,
                static_cast<size_t>(d_model)};
    }
    std::span<const float> a(int t, int l) const { // l in 1..L
        return {attn.data() + (static_cast<size_t>(t) * n_layers + (l - 1)) * d_model,
                static_cast<size_t>(d_model)};
    }
    std::span<const float> m(int t, int l) const {
        return {ffn.data() + (static_cast<size_t>(t) * n_layers + (l - 1)) * d_model,
                static_cast<size_t>(d_model)};
    }
};

// Single-owner mutable decode state; never shared across runs.
struct KVState {
    int n_layers = 0;
    int d_model = 0;
    int capacity = 0;
    int length = 0;
    std::vector<float> k; // [n_layers][capacity][d]
    std::vector<float> v;

    void init(const ModelConfig& cfg);
    float* k_layer(int l) { return k.data() + static_cast<size_t>(l) * capacity * d_model; }
    float* v_layer(int l) { return v.data() + static_cast<size_t>(l) * capacity * d_model; }
    const float* k_layer(int l) const { return k.data() + static_cast<size_t>(l) * capacity * d_model; }
    const float* v_layer(int l) const { return v.data() + static_cast<size_t>(l) * capacity * d_model; }
};

struct PrefillResult {
    ResidualTrace trace;
    KVState kv;
};

// Per-run instrumentation. steering_adds / steering_rescales count the
// per-layer injection work; forward-pass counting backs the negative-context
// cache test.
struct OpCounters {
    uint64_t steering_adds = 0;
    uint64_t steering_rescales = 0;
};

namespace stats {
uint64_t prefill_calls();
void reset_prefill_calls();
} // namespace stats

struct StepSteering {
    const SteeringVector* vsv = nullptr;
    const SteeringConfig* cfg = nullptr;
};

struct StepResult {
    std::vector<float> hiddens; // [n_layers+1][d] levels for the new position
    std::vector<float> logits;  // final-layer logits o^L

    std::span<const float> h(int l, int d) const {
        return {hiddens.data() + static_cast<size_t>(l) * d, static_cast<size_t>(d)};
    }
};

// --- model_core operations ---

Model load_model(const std::string& manifest_path);
void save_model(const Model& model, const std::string& dir);

// Processes the whole layout position by position (causal by construction),
// filling the KV cache. With capture on, the trace spans every prompt
// position with all levels and components.
PrefillResult run_prefill(const Model& model, const PromptLayout& layout, bool capture);

// Processes one new token (or raw embedding row) on top of `kv`. When
// steering is present, each layer's output stream is modified by
// inject_vsv before the next layer reads it and before K/V are cached.
StepResult decode_step(const Model& model, KVState& kv, TokenId token,
                       const StepSteering& steering = {}, OpCounters* counters = nullptr);
StepResult decode_step_row(const Model& model, KVState& kv, std::span<const float> row,
                           const StepSteering& steering = {}, OpCounters* counters = nullptr);

// Last-token residual streams {h^l} for l = 1..L (the vectorization function
// behind steering-vector construction).
std::vector<std::vector<float>> vectorize(const Model& model, const PromptLayout& layout);

// Head applied to an intermediate hidden state. The final pre-head
// normalization is applied at every layer, so lens logits at l = L equal the
// model's output logits.
std::vector<float> logit_lens(const Model& model, std::span<const float> hidden);

} // namespace vista
