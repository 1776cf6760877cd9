#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "vista/model.hpp"
#include "vista/rng.hpp"

namespace vista {

// Synthetic vocabulary layout shared by the toy-model builder and the scene
// generator: a contiguous object-token range inside the vocabulary plus the
// deterministic embedding/confusion tables derived from one seed.
struct VocabSpec {
    int vocab_size = 512;
    int d_model = 64;
    int object_lo = 256; // inclusive
    int object_hi = 512; // exclusive
    uint64_t seed = 0;

    int num_objects() const { return object_hi - object_lo; }
    bool is_object(TokenId t) const { return t >= object_lo && t < object_hi; }
};

// Reserved ids in the synthetic vocabulary.
constexpr TokenId kBosToken = 0;
constexpr TokenId kEndOfCaption = 1;
constexpr TokenId kQueryTokenA = 2;
constexpr TokenId kQueryTokenB = 3;

// A toy "image": present objects, their projector-stub embedding rows, and
// the prior-associated absent partners the model is biased toward.
struct Scene {
    uint64_t scene_id = 0;
    int object_lo = 256; // object-token range this scene draws from
    int object_hi = 512;
    std::vector<TokenId> objects; // sorted, unique, inside the object range
    std::vector<std::vector<float>> visual_embeddings; // one row per object
    std::vector<std::pair<TokenId, TokenId>> confusable_pairs; // (present, absent partner)

    bool is_object_token(TokenId t) const { return t >= object_lo && t < object_hi; }

    std::set<TokenId> object_set() const { return {objects.begin(), objects.end()}; }
    std::set<TokenId> confusable_set() const {
        std::set<TokenId> s;
        for (auto& [p, a] : confusable_pairs) s.insert(a);
        return s;
    }
};

struct ToyModelSpec {
    ModelConfig base{512, 8, 4, 64, 512, 160, 0};
    float prior_strength = 0.0f; // rho >= 0; drift toward confusable partners
    int object_lo = 256;
    int object_hi = 512;
    bool tie_embeddings = true; // forced on

    VocabSpec vocab() const {
        return VocabSpec{base.vocab_size, base.d_model, object_lo, object_hi, base.seed};
    }
};

// Deterministic tables derived from (vocab spec, seed).
std::vector<float> time_direction(const VocabSpec& vocab);
std::vector<float> anchor_direction(const VocabSpec& vocab);
std::vector<float> token_embedding_row(const VocabSpec& vocab, TokenId token);
// Fixed co-occurrence table: a seeded derangement of the object range.
TokenId confusable_partner(const VocabSpec& vocab, TokenId object);

// Objects sampled without replacement; embeddings are the object rows plus
// seeded noise (scale 0.05); partners already present in the scene are not
// listed as confusable.
Scene generate_scene(Rng& rng, int num_objects, const VocabSpec& vocab);

// Constructed (not trained) hallucination-prone model. Attention mixes the
// context near-uniformly into later positions; the FFN suppresses the
// just-processed object token (so captions enumerate instead of repeating)
// and, scaled by rho, drifts late-position streams toward confusable-partner
// embeddings. At rho = 0 there is no systematic drift.
Model build_toy_model(const ToyModelSpec& spec, uint64_t seed);

// Canonical captioning prompt for a scene: [BOS] <visual rows> <query>.
PromptLayout scene_layout(const Scene& scene);
PromptLayout negative_layout();

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
void save_scenes(const std::vector<Scene>& scenes, const std::string& path);
std::vector<Scene> load_scenes(const std::string& path);

} // namespace vista
