#pragma once

#include <vector>

namespace vista {

struct Model;
struct PromptLayout;

// Serial reference implementations, kept independent of the engine's kernel
// path. Tests compare the OpenMP kernels and the cached decode loop against
// these; the benchmark target times the two sides. Accumulation is done in
// double and attention is recomputed over the full sequence with an explicit
// score matrix instead of a KV cache.
namespace reference {

std::vector<float> matvec(const std::vector<float>& m, const std::vector<float>& x, int rows, int cols);
std::vector<float> rmsnorm(const std::vector<float>& x, const std::vector<float>& g, float eps = 1e-6f);
std::vector<float> softmax(const std::vector<float>& x);

// Full-context forward pass: embeds the layout, runs every layer over the
// whole sequence with an explicit [T x T] causal score matrix, and returns
// the final-layer logits at the last position.
std::vector<float> forward_logits(const Model& model, const PromptLayout& layout);

} // namespace reference
} // namespace vista
