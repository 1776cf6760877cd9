#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "vista/model.hpp"
#include "vista/rng.hpp"
#include "vista/sla.hpp"
#include "vista/steering.hpp"

namespace vista {

enum class Strategy { Greedy, Beam, Nucleus };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// Full per-run decode configuration. Steering points at an externally owned
// SteeringVector (per image); SLA is optional and purely logits-space.
struct DecodeConfig {
    Strategy strategy = Strategy::Greedy;
    int beam_width = 1;        // beam only, >= 1
    float top_p = 0.9f;        // nucleus only, in (0, 1]
    float temperature = 1.0f;  // applied after ensembling
    int max_new_tokens = 64;
    std::optional<SteeringConfig> steering;
    const SteeringVector* steering_vector = nullptr;
    std::optional<SlaConfig> sla;
    uint64_t rng_seed = 0;
    std::set<TokenId> stop_tokens;
    bool capture_trace = false;

    void validate(const ModelConfig& model_cfg) const;
};

struct Generation {
    std::vector<TokenId> tokens;
    // Final-layer logits o^L per step (post-steering, pre-SLA).
    std::vector<std::vector<float>> step_final_logits;
    // Ensembled logits per step; filled only when SLA is active.
    std::vector<std::vector<float>> step_ensembled_logits;
    std::optional<ResidualTrace> trace;
    std::vector<double> step_ms; // wall time per emitted token
    OpCounters counters;
    double total_score = 0.0;    // beam: summed log-probability of the result
};

// Argmax; ties broken by lowest token id.
TokenId greedy_select(const std::vector<float>& logits);

// Softmax, sort descending (ties by ascending id), smallest prefix with
// cumulative probability >= top_p, renormalize, sample.
TokenId nucleus_sample(const std::vector<float>& logits, float top_p, Rng& rng);

// The nucleus set itself (sorted ascending); exposed for support checks.
std::vector<TokenId> nucleus_set(const std::vector<float>& logits, float top_p);

// One full generation run: per step, decode (with injection when steering is
// on), lens the trailing window, ensemble, then select by strategy. Stops at
// a stop token or the token budget.
Generation generate(const Model& model, const PromptLayout& layout, const DecodeConfig& cfg);

// Length-unnormalized sum-of-log-probability beam search over the (possibly
// ensembled) per-step distributions. Deterministic given the config.
Generation beam_search(const Model& model, const PromptLayout& layout, const DecodeConfig& cfg);

// Run-record serialization (config, tokens, timing). Timings are flagged
// non-deterministic; everything else reproduces bit-identically from config.
nlohmann::json decode_config_to_json(const DecodeConfig& cfg);
DecodeConfig decode_config_from_json(const nlohmann::json& j);
nlohmann::json generation_to_json(const DecodeConfig& cfg, const Generation& gen);

} // namespace vista
