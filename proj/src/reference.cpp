#include "vista/reference.hpp"

#include <cmath>
#include <stdexcept>

#include "vista/model.hpp"

namespace vista::reference {

std::vector<float> matvec(const std::vector<float>& m, const std::vector<float>& x, int rows, int cols) {
    std::vector<float> y(rows);
    for (int i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < cols; ++j) acc += static_cast<double>(m[static_cast<size_t>(i) * cols + j]) * x[j];
        y[i] = static_cast<float>(acc);
    }
    return y;
}

std::vector<float> rmsnorm(const std::vector<float>& x, const std::vector<float>& g, float eps) {
    double ss = 0.0;
    for (float v : x) ss += static_cast<double>(v) * v;
    double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + eps);
    std::vector<float> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = static_cast<float>(x[i] * inv * g[i]);
    return y;
}

std::vector<float> softmax(const std::vector<float>& x) {
    double mx = x[0];
    for (float v : x) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    std::vector<double> e(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        e[i] = std::exp(static_cast<double>(x[i]) - mx);
        sum += e[i];
    }
    std::vector<float> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = static_cast<float>(e[i] / sum);
    return y;
}

std::vector<float> forward_logits(const Model& model, const PromptLayout& layout) {
    const auto& cfg = model.config;
    const int d = cfg.d_model;
    const int dh = cfg.d_head();
    const int n = layout.length();
    if (n < 1 || n > cfg.max_seq) throw std::runtime_error("reference forward: bad layout length");

    // Embed every position.
    std::vector<std::vector<float>> h(n, std::vector<float>(d));
    int pos = 0;
    auto put = [&](std::span<const float> row) {
        for (int i = 0; i < d; ++i) h[pos][i] = row[i] + model.pos_emb[static_cast<size_t>(pos) * d + i];
        ++pos;
    };
    for (auto t : layout.system_tokens) put(model.embedding_row(t));
    for (auto t : layout.visual_tokens) put(model.embedding_row(t));
    for (const auto& r : layout.visual_rows) put({r.data(), r.size()});
    for (auto t : layout.query_tokens) put(model.embedding_row(t));

    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto& lw = model.layers[l];
        std::vector<std::vector<float>> q(n), k(n), v(n);
        for (int t = 0; t < n; ++t) {
            auto normed = rmsnorm(h[t], lw.norm1_g);
            q[t] = matvec(lw.wq, normed, d, d);
            k[t] = matvec(lw.wk, normed, d, d);
            v[t] = matvec(lw.wv, normed, d, d);
        }
        // Explicit causal score matrix per head.
        std::vector<std::vector<float>> att(n, std::vector<float>(d, 0.0f));
        for (int t = 0; t < n; ++t) {
            for (int head = 0; head < cfg.n_heads; ++head) {
                std::vector<float> scores(t + 1);
                for (int u = 0; u <= t; ++u) {
                    double acc = 0.0;
                    for (int j = 0; j < dh; ++j) {
                        acc += static_cast<double>(q[t][head * dh + j]) * k[u][head * dh + j];
                    }
                    scores[u] = static_cast<float>(acc / std::sqrt(static_cast<double>(dh)));
                }
                auto w = softmax(scores);
                for (int u = 0; u <= t; ++u) {
                    for (int j = 0; j < dh; ++j) {
                        att[t][head * dh + j] += w[u] * v[u][head * dh + j];
                    }
                }
            }
        }
        for (int t = 0; t < n; ++t) {
            auto a = matvec(lw.wo, att[t], d, d);
            for (int i = 0; i < d; ++i) h[t][i] += a[i];
            auto normed = rmsnorm(h[t], lw.norm2_g);
            auto pre = matvec(lw.ffn_w1, normed, cfg.d_ff, d);
            for (int i = 0; i < cfg.d_ff; ++i) {
                pre[i] += lw.ffn_b1[i];
                if (pre[i] < 0.0f) pre[i] = 0.0f;
            }
            auto m = matvec(lw.ffn_w2, pre, d, cfg.d_ff);
            for (int i = 0; i < d; ++i) h[t][i] += m[i];
        }
    }

    auto normed = rmsnorm(h[n - 1], model.final_norm_g);
    std::vector<float> logits(cfg.vocab_size);
    for (int j = 0; j < cfg.vocab_size; ++j) {
        double acc = 0.0;
        for (int i = 0; i < d; ++i) acc += static_cast<double>(model.head_t[static_cast<size_t>(j) * d + i]) * normed[i];
        logits[j] = static_cast<float>(acc);
    }
    return logits;
}

} // namespace vista::reference
