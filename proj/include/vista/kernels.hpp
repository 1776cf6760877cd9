#pragma once

#include <cstddef>

namespace vista::kernels {

// OpenMP-parallel kernels used by the engine. Parallelism is always over
// independent output elements with a fixed serial accumulation order per
// element, so results are bitwise identical for any thread count.

// y = M x, M row-major [rows x cols].
void matvec(const float* m, const float* x, float* y, int rows, int cols);

// y = x / rms(x) * g, rms over d entries with epsilon inside the sqrt.
void rmsnorm(const float* x, const float* g, float* y, int d, float eps = 1e-6f);

// In-place numerically stable softmax over n entries.
void softmax(float* x, int n);

// y += a * v (d entries).
void axpy(float a, const float* v, float* y, int d);

// y *= a (d entries).
void scale(float a, float* y, int d);

float dot(const float* a, const float* b, int d);
float l2norm(const float* x, int d);

// Causal attention for a single query position against a cached K/V prefix.
// q: [n_heads * d_head]; k_cache/v_cache: [len][n_heads * d_head] row-major;
// out: [n_heads * d_head]. Scores are scaled by 1/sqrt(d_head).
void attention_step(const float* q, const float* k_cache, const float* v_cache,
                    int len, int n_heads, int d_head, float* out, float* scores_scratch);

// out = w2 * relu(w1 * x + b1); w1 [d_ff x d], w2 [d x d_ff], scratch [d_ff].
void ffn(const float* w1, const float* b1, const float* w2, const float* x,
         float* out, int d, int d_ff, float* scratch);

} // namespace vista::kernels
