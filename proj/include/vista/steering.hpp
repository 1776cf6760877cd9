#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "vista/model.hpp"

namespace vista {

// Per-layer steering directions v_steer^l = F(positive)^l - F(negative)^l,
// built contrastively from one layout pair per image. Immutable after
// construction and shareable.
struct SteeringVector {
    std::vector<std::vector<float>> per_layer; // L vectors, d_model each
    uint64_t positive_id = 0;                  // content hashes of the layouts used
    uint64_t negative_id = 0;

    int n_layers() const { return static_cast<int>(per_layer.size()); }
};

struct SteeringConfig {
    float lambda = 0.0f;     // injection strength, >= 0
    bool renormalize = true; // rescale to the pre-injection L2 norm
};

// h + lambda*v, rescaled so the L2 norm matches the input norm when
// renormalize is on. Zero-norm inputs (or a zero-norm post-injection vector)
// raise instead of silently dividing.
std::vector<float> inject_vsv(std::span<const float> hidden, std::span<const float> v,
                              const SteeringConfig& cfg);

// In-place variant used inside the decode loop.
void inject_vsv_inplace(float* hidden, const float* v, int d, const SteeringConfig& cfg);

// positive must equal negative plus a visual segment (same system and query
// tokens); violations raise a contrast error.
SteeringVector build_vsv(const Model& model, const PromptLayout& positive,
                         const PromptLayout& negative);

// Cache of negative-context vectorizations keyed by (system, query) token
// ids. Lookups are concurrent; insertion is atomic per key (values are
// deterministic, so last-writer-wins is fine). A miss falls through to a
// forward pass.
class NegativeCache {
public:
    const std::vector<std::vector<float>>& vectorize_negative(const Model& model,
                                                              const PromptLayout& negative);

private:
    std::mutex mu_;
    std::map<uint64_t, std::vector<std::vector<float>>> entries_;
};

// build_vsv with the negative side served from the cache; bit-identical to
// the uncached path.
SteeringVector build_vsv_cached(const Model& model, const PromptLayout& positive,
                                const PromptLayout& negative, NegativeCache& cache);

// Steering vectors round-trip through the same manifest+blob archive format
// as model weights, as tensors "vsv.layer.{l}" for l = 1..L.
void save_vsv(const SteeringVector& vsv, const std::string& dir);
SteeringVector load_vsv(const std::string& manifest_path);

} // namespace vista
