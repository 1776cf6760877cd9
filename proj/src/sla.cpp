#include "vista/sla.hpp"

#include <stdexcept>

namespace vista {

void SlaConfig::validate(int n_layers) const {
    if (gamma < 0.0f || gamma > 1.0f) throw std::invalid_argument("sla: gamma must be in [0, 1]");
    if (window < 1 || window > n_layers - 1) {
        throw std::invalid_argument("sla: window must be in [1, L-1], got " + std::to_string(window));
    }
}

std::vector<float> augmentation_logits(const std::vector<std::vector<float>>& lens) {
    if (lens.empty()) throw std::invalid_argument("augmentation_logits: empty layer list");
    const size_t v = lens[0].size();
    for (const auto& x : lens) {
        if (x.size() != v) throw std::invalid_argument("augmentation_logits: inconsistent logits length");
    }
    std::vector<float> out(v, 0.0f);
    for (const auto& x : lens) {
        for (size_t i = 0; i < v; ++i) out[i] += x[i];
    }
    const float inv = 1.0f / static_cast<float>(lens.size());
    for (float& o : out) o *= inv;
    return out;
}

std::vector<float> ensemble_logits(const std::vector<float>& final_logits,
                                   const std::vector<float>& aug_logits, float gamma) {
    if (final_logits.size() != aug_logits.size()) {
        throw std::invalid_argument("ensemble_logits: length mismatch");
    }
    if (gamma < 0.0f || gamma > 1.0f) throw std::invalid_argument("ensemble_logits: gamma out of [0, 1]");
    std::vector<float> out(final_logits.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0f - gamma) * final_logits[i] + gamma * aug_logits[i];
    }
    return out;
}

} // namespace vista
