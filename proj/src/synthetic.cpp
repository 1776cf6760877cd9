#include "vista/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "vista/kernels.hpp"
#include "vista/util.hpp"

namespace vista {

namespace {

// Construction constants for the toy model. The model is built, not trained:
// attention mixes context near-uniformly (so visual evidence dilutes as the
// sequence grows), an FFN band adds rho-scaled drift toward confusable
// partners gated on generation depth, and the end-of-caption token tracks the
// depth signal so captions terminate once visual evidence has thinned out.
//
// Every position embedding carries a fixed anchor direction so the stream
// norm at layer 0 is bounded below; without it, rms normalization would blow
// up the coefficients of near-empty streams and the FFN gates would lose
// their calibration. Values project the anchor out so it does not accumulate
// across layers.
constexpr float kAnchor = 1.0f;
constexpr float kTextEmbedScale = 0.60f;  // non-object token embedding norm
constexpr float kEocScale = 1.80f;        // end-of-caption alignment with the depth direction
constexpr float kTimeRamp = 8.00f;        // depth ramp scale, quadratic in position
constexpr float kQkNoise = 0.02f;         // keeps attention only near-uniform, not exactly
constexpr float kAnchorScore = 0.15f;     // keys score by anchor fraction: fading streams attract less
constexpr float kAttnMix = 0.50f;         // value/context mixing strength
constexpr float kTimeMix = 1.15f;         // depth signal mixes in faster than content, diluting it
constexpr float kDriftObjRead = 0.40f;    // drift response slope on carried evidence
constexpr float kDriftQueryRead = 0.80f;  // drift context gate: query (language prior) term
constexpr float kDriftTimeRead = 0.70f;   // drift context gate: depth term
constexpr float kDriftGate = 0.75f;       // context-gate threshold
constexpr float kDriftWrite = 1.40f;
constexpr float kDecay = 0.22f;          // per-layer leak on mixed content
constexpr float kVisualNoise = 0.05f;     // scene embedding noise scale

std::vector<float> gaussian_vec(Rng& rng, int d) {
    std::vector<float> v(d);
    for (float& x : v) x = static_cast<float>(rng.next_normal());
    return v;
}

void normalize(std::vector<float>& v) {
    float n = kernels::l2norm(v.data(), static_cast<int>(v.size()));
    if (n > 0.0f) kernels::scale(1.0f / n, v.data(), static_cast<int>(v.size()));
}

// Remove the u component, then rescale to unit norm.
void orthogonalize(std::vector<float>& v, const std::vector<float>& u) {
    float c = kernels::dot(v.data(), u.data(), static_cast<int>(v.size()));
    kernels::axpy(-c, u.data(), v.data(), static_cast<int>(v.size()));
    normalize(v);
}

} // namespace

std::vector<float> time_direction(const VocabSpec& vocab) {
    Rng rng(derive_seed(vocab.seed, "time"));
    auto u = gaussian_vec(rng, vocab.d_model);
    normalize(u);
    return u;
}

std::vector<float> anchor_direction(const VocabSpec& vocab) {
    Rng rng(derive_seed(vocab.seed, "anchor"));
    auto u = gaussian_vec(rng, vocab.d_model);
    normalize(u);
    orthogonalize(u, time_direction(vocab));
    return u;
}

std::vector<float> token_embedding_row(const VocabSpec& vocab, TokenId token) {
    if (token < 0 || token >= vocab.vocab_size) {
        throw std::invalid_argument("token_embedding_row: token out of range");
    }
    auto u = time_direction(vocab);
    if (token == kBosToken) {
        // Null row: the system position contributes nothing to the mix.
        return std::vector<float>(vocab.d_model, 0.0f);
    }
    if (token == kEndOfCaption) {
        std::vector<float> e(u);
        kernels::scale(kEocScale, e.data(), vocab.d_model);
        return e;
    }
    Rng rng(derive_seed(vocab.seed, "emb", static_cast<uint64_t>(token)));
    auto e = gaussian_vec(rng, vocab.d_model);
    orthogonalize(e, u);
    orthogonalize(e, anchor_direction(vocab));
    if (!vocab.is_object(token)) kernels::scale(kTextEmbedScale, e.data(), vocab.d_model);
    return e;
}

TokenId confusable_partner(const VocabSpec& vocab, TokenId object) {
    if (!vocab.is_object(object)) {
        throw std::invalid_argument("confusable_partner: token outside object range");
    }
    const int n = vocab.num_objects();
    // Seeded derangement of the object range, fixed for the vocabulary.
    Rng rng(derive_seed(vocab.seed, "confusion"));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.next_below(static_cast<uint64_t>(i + 1)));
        std::swap(perm[i], perm[j]);
    }
    for (int i = 0; i < n; ++i) {
        if (perm[i] == i) std::swap(perm[i], perm[(i + 1) % n]);
    }
    return vocab.object_lo + perm[object - vocab.object_lo];
}

Scene generate_scene(Rng& rng, int num_objects, const VocabSpec& vocab) {
    if (num_objects < 1 || num_objects > vocab.num_objects()) {
        throw std::invalid_argument("generate_scene: num_objects out of range");
    }
    Scene scene;
    scene.scene_id = rng.next_u64();
    scene.object_lo = vocab.object_lo;
    scene.object_hi = vocab.object_hi;

    std::set<TokenId> chosen;
    while (static_cast<int>(chosen.size()) < num_objects) {
        chosen.insert(vocab.object_lo +
                      static_cast<TokenId>(rng.next_below(static_cast<uint64_t>(vocab.num_objects()))));
    }
    scene.objects.assign(chosen.begin(), chosen.end());

    auto u_time = time_direction(vocab);
    auto u_anchor = anchor_direction(vocab);
    for (TokenId obj : scene.objects) {
        auto row = token_embedding_row(vocab, obj);
        // Noise is sampled off the reserved depth/anchor directions; those
        // coefficients are load-bearing for the constructed dynamics.
        std::vector<float> noise(row.size());
        for (float& x : noise) x = static_cast<float>(rng.next_normal());
        float ct = kernels::dot(noise.data(), u_time.data(), (int)noise.size());
        kernels::axpy(-ct, u_time.data(), noise.data(), (int)noise.size());
        float ca = kernels::dot(noise.data(), u_anchor.data(), (int)noise.size());
        kernels::axpy(-ca, u_anchor.data(), noise.data(), (int)noise.size());
        kernels::axpy(kVisualNoise, noise.data(), row.data(), (int)noise.size());
        scene.visual_embeddings.push_back(std::move(row));
    }
    for (TokenId obj : scene.objects) {
        TokenId partner = confusable_partner(vocab, obj);
        if (!chosen.count(partner)) scene.confusable_pairs.emplace_back(obj, partner);
    }
    return scene;
}

Model build_toy_model(const ToyModelSpec& spec, uint64_t seed) {
    ModelConfig cfg = spec.base;
    cfg.seed = seed;
    cfg.validate();
    if (spec.object_lo < 0 || spec.object_hi > cfg.vocab_size || spec.object_lo >= spec.object_hi) {
        throw std::invalid_argument("build_toy_model: bad object range");
    }
    const int n_obj = spec.object_hi - spec.object_lo;
    if (cfg.d_ff < 2 * n_obj) {
        throw std::invalid_argument("build_toy_model: d_ff must be >= twice the object range size");
    }
    if (spec.prior_strength < 0.0f) {
        throw std::invalid_argument("build_toy_model: prior_strength must be >= 0");
    }

    const int d = cfg.d_model;
    VocabSpec vocab{cfg.vocab_size, d, spec.object_lo, spec.object_hi, seed};
    auto u_time = time_direction(vocab);
    auto u_anchor = anchor_direction(vocab);

    Model m;
    m.config = cfg;
    m.tied_head = true; // tie_embeddings is forced on

    m.tok_emb.resize(static_cast<size_t>(cfg.vocab_size) * d);
    for (TokenId t = 0; t < cfg.vocab_size; ++t) {
        auto row = token_embedding_row(vocab, t);
        std::copy(row.begin(), row.end(), m.tok_emb.begin() + static_cast<size_t>(t) * d);
    }
    m.head_t = m.tok_emb;

    m.pos_emb.assign(static_cast<size_t>(cfg.max_seq) * d, 0.0f);
    for (int t = 0; t < cfg.max_seq; ++t) {
        float frac = static_cast<float>(t) / static_cast<float>(cfg.max_seq);
        float ramp = kTimeRamp * frac * frac;
        for (int i = 0; i < d; ++i) {
            m.pos_emb[static_cast<size_t>(t) * d + i] = ramp * u_time[i] + kAnchor * u_anchor[i];
        }
    }

    m.final_norm_g.assign(d, 1.0f);
    m.layers.resize(cfg.n_layers);
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& lw = m.layers[l];
        lw.norm1_g.assign(d, 1.0f);
        lw.norm2_g.assign(d, 1.0f);

        Rng lrng(derive_seed(seed, "layer", static_cast<uint64_t>(l)));
        lw.wq.resize(static_cast<size_t>(d) * d);
        lw.wk.resize(static_cast<size_t>(d) * d);
        for (auto& x : lw.wq) x = kQkNoise * static_cast<float>(lrng.next_normal());
        for (auto& x : lw.wk) x = kQkNoise * static_cast<float>(lrng.next_normal());
        // Anchor-keyed scores: a stream whose norm has grown (its anchor
        // fraction shrank) draws less attention, which caps the positive
        // feedback of a position attending to itself.
        for (int i = 0; i < d; ++i) {
            for (int k = 0; k < d; ++k) {
                float aa = kAnchorScore * u_anchor[i] * u_anchor[k];
                lw.wq[static_cast<size_t>(i) * d + k] += aa;
                lw.wk[static_cast<size_t>(i) * d + k] += aa;
            }
        }

        // Values mix the context but project the anchor out, so the anchor
        // keeps a fixed coefficient instead of compounding across layers. The
        // depth direction mixes in at a higher gain than content: as the
        // sequence grows the depth share of the norm budget rises and the
        // visual evidence behind every object logit thins out.
        lw.wv.assign(static_cast<size_t>(d) * d, 0.0f);
        lw.wo.assign(static_cast<size_t>(d) * d, 0.0f);
        for (int i = 0; i < d; ++i) {
            for (int k = 0; k < d; ++k) {
                lw.wv[static_cast<size_t>(i) * d + k] =
                    kAttnMix * ((i == k ? 1.0f : 0.0f) - u_anchor[i] * u_anchor[k]) +
                    (kTimeMix - kAttnMix) * u_time[i] * u_time[k];
            }
            lw.wo[static_cast<size_t>(i) * d + i] = 1.0f;
        }

        // Prior drift, one differential ReLU pair per object j. With the
        // shared context gate s = q*query + b*depth - theta, the pair
        // ReLU(s + a*evidence_j) - ReLU(s) contributes exactly a*evidence_j
        // once the gate is open and nothing while it is closed. Rho scales
        // the write toward the confusable partner. Steering starves the gate:
        // the query and depth shares it reads are exactly what injection
        // squeezes out of the stream.
        lw.ffn_w1.assign(static_cast<size_t>(cfg.d_ff) * d, 0.0f);
        lw.ffn_b1.assign(cfg.d_ff, 0.0f);
        lw.ffn_w2.assign(static_cast<size_t>(d) * cfg.d_ff, 0.0f);
        auto q_dir = token_embedding_row(vocab, kQueryTokenB);
        normalize(q_dir);
        for (int j = 0; j < n_obj; ++j) {
            TokenId obj = spec.object_lo + j;
            const float* e = m.tok_emb.data() + static_cast<size_t>(obj) * d;
            float* row_ev = lw.ffn_w1.data() + static_cast<size_t>(j) * d;
            float* row_base = lw.ffn_w1.data() + static_cast<size_t>(n_obj + j) * d;
            for (int i = 0; i < d; ++i) {
                float shared = kDriftQueryRead * q_dir[i] + kDriftTimeRead * u_time[i];
                row_ev[i] = shared + kDriftObjRead * e[i];
                row_base[i] = shared;
            }
            lw.ffn_b1[j] = -kDriftGate;
            lw.ffn_b1[n_obj + j] = -kDriftGate;

            TokenId partner = confusable_partner(vocab, obj);
            const float* ep = m.tok_emb.data() + static_cast<size_t>(partner) * d;
            for (int i = 0; i < d; ++i) {
                float w = spec.prior_strength * kDriftWrite * ep[i];
                lw.ffn_w2[static_cast<size_t>(i) * cfg.d_ff + j] = w;
                lw.ffn_w2[static_cast<size_t>(i) * cfg.d_ff + n_obj + j] = -w;
            }
        }
    }
    return m;
}

PromptLayout scene_layout(const Scene& scene) {
    PromptLayout layout;
    layout.system_tokens = {kBosToken};
    layout.visual_rows = scene.visual_embeddings;
    layout.query_tokens = {kQueryTokenA, kQueryTokenB};
    return layout;
}

PromptLayout negative_layout() {
    PromptLayout layout;
    layout.system_tokens = {kBosToken};
    layout.query_tokens = {kQueryTokenA, kQueryTokenB};
    return layout;
}

namespace {

std::string row_to_hex(const std::vector<float>& row) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(row.size() * 8);
    for (float f : row) {
        uint32_t bits;
        std::memcpy(&bits, &f, sizeof(bits));
        for (int b = 0; b < 4; ++b) { // little-endian byte order
            uint8_t byte = static_cast<uint8_t>((bits >> (8 * b)) & 0xff);
            out.push_back(digits[byte >> 4]);
            out.push_back(digits[byte & 0xf]);
        }
    }
    return out;
}

std::vector<float> row_from_hex(const std::string& hex) {
    if (hex.size() % 8 != 0) throw std::runtime_error("scene: bad embedding hex length");
    auto nib = [](char c) -> uint32_t {
        if (c >= '0' && c <= '9') return static_cast<uint32_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<uint32_t>(c - 'a' + 10);
        throw std::runtime_error("scene: bad hex digit");
    };
    std::vector<float> row(hex.size() / 8);
    for (size_t i = 0; i < row.size(); ++i) {
        uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            uint32_t byte = (nib(hex[i * 8 + 2 * b]) << 4) | nib(hex[i * 8 + 2 * b + 1]);
            bits |= byte << (8 * b);
        }
        std::memcpy(&row[i], &bits, sizeof(float));
    }
    return row;
}

} // namespace

nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["scene_id"] = scene.scene_id;
    j["object_lo"] = scene.object_lo;
    j["object_hi"] = scene.object_hi;
    j["objects"] = scene.objects;
    j["confusable_pairs"] = scene.confusable_pairs;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : scene.visual_embeddings) rows.push_back(row_to_hex(r));
    j["visual_embeddings_hex"] = rows;
    return j;
}

Scene scene_from_json(const nlohmann::json& j) {
    Scene scene;
    scene.scene_id = j.at("scene_id").get<uint64_t>();
    scene.object_lo = j.at("object_lo").get<int>();
    scene.object_hi = j.at("object_hi").get<int>();
    scene.objects = j.at("objects").get<std::vector<TokenId>>();
    scene.confusable_pairs = j.at("confusable_pairs").get<std::vector<std::pair<TokenId, TokenId>>>();
    for (const auto& hex : j.at("visual_embeddings_hex")) {
        scene.visual_embeddings.push_back(row_from_hex(hex.get<std::string>()));
    }
    return scene;
}

void save_scenes(const std::vector<Scene>& scenes, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : scenes) j.push_back(scene_to_json(s));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_scenes: cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

std::vector<Scene> load_scenes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_scenes: cannot open '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<Scene> scenes;
    for (const auto& js : j) scenes.push_back(scene_from_json(js));
    return scenes;
}

} // namespace vista
