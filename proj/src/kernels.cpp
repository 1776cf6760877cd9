#include "vista/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace vista::kernels {

void matvec(const float* m, const float* x, float* y, int rows, int cols) {
#pragma omp parallel for schedule(static) if (rows >= 64)
    for (int i = 0; i < rows; ++i) {
        const float* row = m + static_cast<size_t>(i) * cols;
        float acc = 0.0f;
        for (int j = 0; j < cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

void rmsnorm(const float* x, const float* g, float* y, int d, float eps) {
    float ss = 0.0f;
    for (int i = 0; i < d; ++i) ss += x[i] * x[i];
    float inv = 1.0f / std::sqrt(ss / static_cast<float>(d) + eps);
    for (int i = 0; i < d; ++i) y[i] = x[i] * inv * g[i];
}

void softmax(float* x, int n) {
    float mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    float sum = 0.0f;
    for (int i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - mx);
        sum += x[i];
    }
    float inv = 1.0f / sum;
    for (int i = 0; i < n; ++i) x[i] *= inv;
}

void axpy(float a, const float* v, float* y, int d) {
    for (int i = 0; i < d; ++i) y[i] += a * v[i];
}

void scale(float a, float* y, int d) {
    for (int i = 0; i < d; ++i) y[i] *= a;
}

float dot(const float* a, const float* b, int d) {
    float acc = 0.0f;
    for (int i = 0; i < d; ++i) acc += a[i] * b[i];
    return acc;
}

float l2norm(const float* x, int d) {
    float acc = 0.0f;
    for (int i = 0; i < d; ++i) acc += x[i] * x[i];
    return std::sqrt(acc);
}

void attention_step(const float* q, const float* k_cache, const float* v_cache,
                    int len, int n_heads, int d_head, float* out, float* scores_scratch) {
    const int d = n_heads * d_head;
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(d_head));
#pragma omp parallel for schedule(static) if (n_heads >= 8)
    for (int h = 0; h < n_heads; ++h) {
        const float* qh = q + h * d_head;
        float* scores = scores_scratch + static_cast<size_t>(h) * len;
        for (int t = 0; t < len; ++t) {
            const float* kh = k_cache + static_cast<size_t>(t) * d + h * d_head;
            float acc = 0.0f;
            for (int j = 0; j < d_head; ++j) acc += qh[j] * kh[j];
            scores[t] = acc * inv_sqrt;
        }
        softmax(scores, len);
        float* oh = out + h * d_head;
        std::fill(oh, oh + d_head, 0.0f);
        for (int t = 0; t < len; ++t) {
            const float* vh = v_cache + static_cast<size_t>(t) * d + h * d_head;
            for (int j = 0; j < d_head; ++j) oh[j] += scores[t] * vh[j];
        }
    }
}

void ffn(const float* w1, const float* b1, const float* w2, const float* x,
         float* out, int d, int d_ff, float* scratch) {
#pragma omp parallel for schedule(static) if (d_ff >= 64)
    for (int i = 0; i < d_ff; ++i) {
        const float* row = w1 + static_cast<size_t>(i) * d;
        float acc = b1[i];
        for (int j = 0; j < d; ++j) acc += row[j] * x[j];
        scratch[i] = acc > 0.0f ? acc : 0.0f;
    }
    matvec(w2, scratch, out, d, d_ff);
}

} // namespace vista::kernels
