#include "vista/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "vista/kernels.hpp"
#include "vista/steering.hpp"
#include "vista/tensor_archive.hpp"
#include "vista/util.hpp"

namespace vista {

namespace {
std::atomic<uint64_t> g_prefill_calls{0};
constexpr float kNormEps = 1e-6f;
} // namespace

namespace stats {
uint64_t prefill_calls() { return g_prefill_calls.load(); }
void reset_prefill_calls() { g_prefill_calls.store(0); }
} // namespace stats

void ModelConfig::validate() const {
    if (vocab_size < 8) throw std::runtime_error("model config: vocab_size must be >= 8");
    if (n_layers < 2) throw std::runtime_error("model config: n_layers must be >= 2");
    if (max_seq < 16) throw std::runtime_error("model config: max_seq must be >= 16");
    if (n_heads < 1 || d_model < 1 || d_ff < 1) throw std::runtime_error("model config: bad dims");
    if (d_model % n_heads != 0) throw std::runtime_error("model config: d_model not divisible by n_heads");
}

uint64_t Model::parameter_checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::vector<float>& v) {
        h = fnv1a64(v.data(), v.size() * sizeof(float), h);
    };
    mix(tok_emb);
    mix(pos_emb);
    for (const auto& l : layers) {
        mix(l.wq); mix(l.wk); mix(l.wv); mix(l.wo);
        mix(l.norm1_g); mix(l.norm2_g);
        mix(l.ffn_w1); mix(l.ffn_b1); mix(l.ffn_w2);
    }
    mix(final_norm_g);
    mix(head_t);
    return h;
}

uint64_t PromptLayout::content_hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix_ids = [&h](const std::vector<TokenId>& ids) {
        uint32_t n = static_cast<uint32_t>(ids.size());
        h = fnv1a64(&n, sizeof(n), h);
        h = fnv1a64(ids.data(), ids.size() * sizeof(TokenId), h);
    };
    mix_ids(system_tokens);
    mix_ids(visual_tokens);
    uint32_t nrows = static_cast<uint32_t>(visual_rows.size());
    h = fnv1a64(&nrows, sizeof(nrows), h);
    for (const auto& row : visual_rows) h = fnv1a64(row.data(), row.size() * sizeof(float), h);
    mix_ids(query_tokens);
    return h;
}

void KVState::init(const ModelConfig& cfg) {
    n_layers = cfg.n_layers;
    d_model = cfg.d_model;
    capacity = cfg.max_seq;
    length = 0;
    k.assign(static_cast<size_t>(n_layers) * capacity * d_model, 0.0f);
    v.assign(static_cast<size_t>(n_layers) * capacity * d_model, 0.0f);
}

// --- archive mapping ---

namespace {

std::vector<float> take(const TensorArchive& ar, const std::string& name,
                        std::vector<int64_t> want_shape) {
    const Tensor& t = ar.at(name);
    if (t.shape != want_shape) {
        std::string got = "[", want = "[";
        for (auto d : t.shape) got += std::to_string(d) + ",";
        for (auto d : want_shape) want += std::to_string(d) + ",";
        throw std::runtime_error("model load: shape mismatch for tensor '" + name +
                                 "' (got " + got + "], want " + want + "])");
    }
    return t.data;
}

} // namespace

Model load_model(const std::string& manifest_path) {
    TensorArchive ar = TensorArchive::load(manifest_path);
    const auto& meta = ar.meta;

    Model m;
    m.config.vocab_size = meta.at("vocab_size").get<int>();
    m.config.n_layers = meta.at("n_layers").get<int>();
    m.config.n_heads = meta.at("n_heads").get<int>();
    m.config.d_model = meta.at("d_model").get<int>();
    m.config.d_ff = meta.at("d_ff").get<int>();
    m.config.max_seq = meta.at("max_seq").get<int>();
    m.config.seed = meta.value("seed", 0ull);
    m.tied_head = meta.value("tied_head", false);
    m.config.validate();

    const int64_t V = m.config.vocab_size, d = m.config.d_model;
    const int64_t dff = m.config.d_ff, T = m.config.max_seq;

    m.tok_emb = take(ar, "tok_emb", {V, d});
    m.pos_emb = take(ar, "pos_emb", {T, d});
    m.layers.resize(m.config.n_layers);
    for (int l = 0; l < m.config.n_layers; ++l) {
        std::string p = "layers." + std::to_string(l) + ".";
        auto& lw = m.layers[l];
        lw.wq = take(ar, p + "attn.wq", {d, d});
        lw.wk = take(ar, p + "attn.wk", {d, d});
        lw.wv = take(ar, p + "attn.wv", {d, d});
        lw.wo = take(ar, p + "attn.wo", {d, d});
        lw.norm1_g = take(ar, p + "norm1.g", {d});
        lw.norm2_g = take(ar, p + "norm2.g", {d});
        lw.ffn_w1 = take(ar, p + "ffn.w1", {dff, d});
        lw.ffn_b1 = take(ar, p + "ffn.b1", {dff});
        lw.ffn_w2 = take(ar, p + "ffn.w2", {d, dff});
    }
    m.final_norm_g = take(ar, "final_norm.g", {d});

    // Archive stores head as [d x V]; compute wants rows of V embeddings.
    std::vector<float> head = take(ar, "head", {d, V});
    m.head_t.resize(static_cast<size_t>(V) * d);
    for (int64_t i = 0; i < d; ++i)
        for (int64_t j = 0; j < V; ++j)
            m.head_t[j * d + i] = head[i * V + j];

    if (m.tied_head && m.head_t != m.tok_emb) {
        throw std::runtime_error("model load: tied_head set but tensor 'head' is not the embedding transpose");
    }
    return m;
}

void save_model(const Model& m, const std::string& dir) {
    const int64_t V = m.config.vocab_size, d = m.config.d_model;
    const int64_t dff = m.config.d_ff, T = m.config.max_seq;

    TensorArchive ar;
    ar.meta = {
        {"kind", "model"},
        {"vocab_size", m.config.vocab_size},
        {"n_layers", m.config.n_layers},
        {"n_heads", m.config.n_heads},
        {"d_model", m.config.d_model},
        {"d_ff", m.config.d_ff},
        {"max_seq", m.config.max_seq},
        {"seed", m.config.seed},
        {"tied_head", m.tied_head},
    };
    ar.add("tok_emb", {V, d}, m.tok_emb);
    ar.add("pos_emb", {T, d}, m.pos_emb);
    for (int l = 0; l < m.config.n_layers; ++l) {
        std::string p = "layers." + std::to_string(l) + ".";
        const auto& lw = m.layers[l];
        ar.add(p + "attn.wq", {d, d}, lw.wq);
        ar.add(p + "attn.wk", {d, d}, lw.wk);
        ar.add(p + "attn.wv", {d, d}, lw.wv);
        ar.add(p + "attn.wo", {d, d}, lw.wo);
        ar.add(p + "norm1.g", {d}, lw.norm1_g);
        ar.add(p + "norm2.g", {d}, lw.norm2_g);
        ar.add(p + "ffn.w1", {dff, d}, lw.ffn_w1);
        ar.add(p + "ffn.b1", {dff}, lw.ffn_b1);
        ar.add(p + "ffn.w2", {d, dff}, lw.ffn_w2);
    }
    ar.add("final_norm.g", {d}, m.final_norm_g);

    std::vector<float> head(static_cast<size_t>(d) * V);
    for (int64_t j = 0; j < V; ++j)
        for (int64_t i = 0; i < d; ++i)
            head[i * V + j] = m.head_t[j * d + i];
    ar.add("head", {d, V}, std::move(head));
    ar.save(dir);
}

// --- forward pass ---

namespace {

struct Scratch {
    std::vector<float> normed, q, k, v, att_out, a, m, ffn_hidden, scores;

    explicit Scratch(const ModelConfig& cfg)
        : normed(cfg.d_model), q(cfg.d_model), k(cfg.d_model), v(cfg.d_model),
          att_out(cfg.d_model), a(cfg.d_model), m(cfg.d_model),
          ffn_hidden(cfg.d_ff), scores(static_cast<size_t>(cfg.n_heads) * cfg.max_seq) {}
};

// Runs one position through all layers. `h` enters as the layer-0 stream and
// leaves as the final-layer stream; K/V for the position are appended to the
// cache. Optional per-layer capture and steering hooks.
void forward_position(const Model& model, KVState& kv, float* h, Scratch& s,
                      const StepSteering& steering, OpCounters* counters,
                      float* capture_levels, float* capture_attn, float* capture_ffn) {
    const auto& cfg = model.config;
    const int d = cfg.d_model;
    const int pos = kv.length;
    if (pos >= cfg.max_seq) throw std::runtime_error("decode: position overflows max_seq");

    const SteeringVector* vsv = steering.vsv;
    if (vsv && vsv->n_layers() != cfg.n_layers) {
        throw std::runtime_error("decode: steering vector layer count does not match model");
    }

    if (capture_levels) std::memcpy(capture_levels, h, d * sizeof(float));

    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto& lw = model.layers[l];

        kernels::rmsnorm(h, lw.norm1_g.data(), s.normed.data(), d, kNormEps);
        kernels::matvec(lw.wq.data(), s.normed.data(), s.q.data(), d, d);
        kernels::matvec(lw.wk.data(), s.normed.data(), s.k.data(), d, d);
        kernels::matvec(lw.wv.data(), s.normed.data(), s.v.data(), d, d);

        float* kl = kv.k_layer(l) + static_cast<size_t>(pos) * d;
        float* vl = kv.v_layer(l) + static_cast<size_t>(pos) * d;
        std::memcpy(kl, s.k.data(), d * sizeof(float));
        std::memcpy(vl, s.v.data(), d * sizeof(float));

        kernels::attention_step(s.q.data(), kv.k_layer(l), kv.v_layer(l), pos + 1,
                                cfg.n_heads, cfg.d_head(), s.att_out.data(), s.scores.data());
        kernels::matvec(lw.wo.data(), s.att_out.data(), s.a.data(), d, d);

        for (int i = 0; i < d; ++i) h[i] += s.a[i];

        kernels::rmsnorm(h, lw.norm2_g.data(), s.normed.data(), d, kNormEps);
        kernels::ffn(lw.ffn_w1.data(), lw.ffn_b1.data(), lw.ffn_w2.data(), s.normed.data(),
                     s.m.data(), d, cfg.d_ff, s.ffn_hidden.data());
        for (int i = 0; i < d; ++i) h[i] += s.m[i];

        if (capture_attn) std::memcpy(capture_attn + static_cast<size_t>(l) * d, s.a.data(), d * sizeof(float));
        if (capture_ffn) std::memcpy(capture_ffn + static_cast<size_t>(l) * d, s.m.data(), d * sizeof(float));

        if (vsv) {
            inject_vsv_inplace(h, vsv->per_layer[l].data(), d, *steering.cfg);
            if (counters) {
                counters->steering_adds += 1;
                counters->steering_rescales += steering.cfg->renormalize ? 1 : 0;
            }
        }

        if (capture_levels) {
            std::memcpy(capture_levels + static_cast<size_t>(l + 1) * d, h, d * sizeof(float));
        }
    }
    kv.length = pos + 1;
}

void embed_at(const Model& model, std::span<const float> row, int pos, float* out) {
    const int d = model.config.d_model;
    const float* p = model.pos_emb.data() + static_cast<size_t>(pos) * d;
    for (int i = 0; i < d; ++i) out[i] = row[i] + p[i];
}

std::span<const float> layout_row(const Model& model, const PromptLayout& layout, int idx) {
    size_t i = static_cast<size_t>(idx);
    if (i < layout.system_tokens.size()) return model.embedding_row(layout.system_tokens[i]);
    i -= layout.system_tokens.size();
    if (i < layout.visual_tokens.size()) return model.embedding_row(layout.visual_tokens[i]);
    i -= layout.visual_tokens.size();
    if (i < layout.visual_rows.size()) {
        const auto& r = layout.visual_rows[i];
        if (static_cast<int>(r.size()) != model.config.d_model) {
            throw std::runtime_error("prefill: visual row has wrong dimension");
        }
        return {r.data(), r.size()};
    }
    i -= layout.visual_rows.size();
    return model.embedding_row(layout.query_tokens[i]);
}

void check_token(const Model& model, TokenId t) {
    if (t < 0 || t >= model.config.vocab_size) {
        throw std::runtime_error("token id " + std::to_string(t) + " out of range");
    }
}

} // namespace

std::vector<float> logit_lens(const Model& model, std::span<const float> hidden) {
    const int d = model.config.d_model;
    if (static_cast<int>(hidden.size()) != d) throw std::runtime_error("logit_lens: wrong hidden size");
    for (float x : hidden) {
        if (!std::isfinite(x)) throw std::runtime_error("logit_lens: non-finite hidden state");
    }
    std::vector<float> normed(d);
    kernels::rmsnorm(hidden.data(), model.final_norm_g.data(), normed.data(), d, kNormEps);
    std::vector<float> logits(model.config.vocab_size);
    kernels::matvec(model.head_t.data(), normed.data(), logits.data(), model.config.vocab_size, d);
    return logits;
}

PrefillResult run_prefill(const Model& model, const PromptLayout& layout, bool capture) {
    const auto& cfg = model.config;
    const int n = layout.length();
    if (n < 1) throw std::runtime_error("prefill: empty layout");
    if (n > cfg.max_seq) throw std::runtime_error("prefill: layout length exceeds max_seq");
    for (TokenId t : layout.system_tokens) check_token(model, t);
    for (TokenId t : layout.visual_tokens) check_token(model, t);
    for (TokenId t : layout.query_tokens) check_token(model, t);
    g_prefill_calls.fetch_add(1, std::memory_order_relaxed);

    PrefillResult out;
    out.kv.init(cfg);
    const int d = cfg.d_model;
    if (capture) {
        out.trace.steps = n;
        out.trace.n_layers = cfg.n_layers;
        out.trace.d_model = d;
        out.trace.has_components = true;
        out.trace.hidden.resize(static_cast<size_t>(n) * (cfg.n_layers + 1) * d);
        out.trace.attn.resize(static_cast<size_t>(n) * cfg.n_layers * d);
        out.trace.ffn.resize(static_cast<size_t>(n) * cfg.n_layers * d);
    }

    Scratch s(cfg);
    std::vector<float> h(d);
    for (int pos = 0; pos < n; ++pos) {
        embed_at(model, layout_row(model, layout, pos), pos, h.data());
        float* levels = capture ? out.trace.hidden.data() + static_cast<size_t>(pos) * (cfg.n_layers + 1) * d : nullptr;
        float* at = capture ? out.trace.attn.data() + static_cast<size_t>(pos) * cfg.n_layers * d : nullptr;
        float* ff = capture ? out.trace.ffn.data() + static_cast<size_t>(pos) * cfg.n_layers * d : nullptr;
        forward_position(model, out.kv, h.data(), s, {}, nullptr, levels, at, ff);
    }
    return out;
}

namespace {

StepResult decode_common(const Model& model, KVState& kv, std::span<const float> row,
                         const StepSteering& steering, OpCounters* counters) {
    const auto& cfg = model.config;
    const int d = cfg.d_model;
    StepResult r;
    r.hiddens.resize(static_cast<size_t>(cfg.n_layers + 1) * d);

    Scratch s(cfg);
    std::vector<float> h(d);
    embed_at(model, row, kv.length, h.data());
    forward_position(model, kv, h.data(), s, steering, counters, r.hiddens.data(), nullptr, nullptr);
    r.logits = logit_lens(model, {h.data(), static_cast<size_t>(d)});
    return r;
}

} // namespace

StepResult decode_step(const Model& model, KVState& kv, TokenId token,
                       const StepSteering& steering, OpCounters* counters) {
    check_token(model, token);
    return decode_common(model, kv, model.embedding_row(token), steering, counters);
}

StepResult decode_step_row(const Model& model, KVState& kv, std::span<const float> row,
                           const StepSteering& steering, OpCounters* counters) {
    if (static_cast<int>(row.size()) != model.config.d_model) {
        throw std::runtime_error("decode: visual row has wrong dimension");
    }
    return decode_common(model, kv, row, steering, counters);
}

std::vector<std::vector<float>> vectorize(const Model& model, const PromptLayout& layout) {
    if (layout.length() < 1) throw std::invalid_argument("vectorize: empty layout");
    PrefillResult pre = run_prefill(model, layout, true);
    const int last = pre.trace.steps - 1;
    std::vector<std::vector<float>> out(model.config.n_layers);
    for (int l = 1; l <= model.config.n_layers; ++l) {
        auto col = pre.trace.h(last, l);
        out[l - 1].assign(col.begin(), col.end());
    }
    return out;
}

} // namespace vista
