#pragma once

#include <vector>

namespace vista {

// Self-logits augmentation: average the lens logits of the w layers before
// the final layer and mix them into the final logits with weight gamma.
struct SlaConfig {
    float gamma = 0.0f; // in [0, 1]
    int window = 1;     // in [1, L-1]; out-of-range is rejected, never clamped

    void validate(int n_layers) const;
};

// Elementwise mean of exactly `lens.size()` logit vectors, ordered by layer
// (L-w .. L-1).
std::vector<float> augmentation_logits(const std::vector<std::vector<float>>& lens);

// (1-gamma)*final + gamma*aug, elementwise.
std::vector<float> ensemble_logits(const std::vector<float>& final_logits,
                                   const std::vector<float>& aug_logits, float gamma);

} // namespace vista
