#include "vista/steering.hpp"

#include <cmath>
#include <stdexcept>

#include "vista/kernels.hpp"
#include "vista/tensor_archive.hpp"

namespace vista {

void inject_vsv_inplace(float* hidden, const float* v, int d, const SteeringConfig& cfg) {
    if (cfg.lambda < 0.0f) throw std::invalid_argument("inject_vsv: lambda must be >= 0");
    float norm_before = 0.0f;
    if (cfg.renormalize) {
        norm_before = kernels::l2norm(hidden, d);
        if (norm_before == 0.0f) {
            throw std::runtime_error("inject_vsv: zero-norm hidden state with renormalization on");
        }
    }
    kernels::axpy(cfg.lambda, v, hidden, d);
    if (cfg.renormalize) {
        float norm_after = kernels::l2norm(hidden, d);
        if (norm_after == 0.0f) {
            throw std::runtime_error("inject_vsv: injection produced a zero-norm state");
        }
        kernels::scale(norm_before / norm_after, hidden, d);
    }
}

std::vector<float> inject_vsv(std::span<const float> hidden, std::span<const float> v,
                              const SteeringConfig& cfg) {
    if (hidden.size() != v.size()) throw std::invalid_argument("inject_vsv: dimension mismatch");
    for (float x : hidden) if (!std::isfinite(x)) throw std::runtime_error("inject_vsv: non-finite hidden");
    for (float x : v) if (!std::isfinite(x)) throw std::runtime_error("inject_vsv: non-finite steering vector");
    std::vector<float> out(hidden.begin(), hidden.end());
    inject_vsv_inplace(out.data(), v.data(), static_cast<int>(out.size()), cfg);
    return out;
}

namespace {

void check_pair(const PromptLayout& positive, const PromptLayout& negative) {
    if (negative.has_visual()) {
        throw std::runtime_error("build_vsv: negative layout must not contain a visual segment");
    }
    if (negative.system_tokens != positive.system_tokens ||
        negative.query_tokens != positive.query_tokens) {
        throw std::runtime_error("build_vsv: positive/negative pair differs outside the visual segment");
    }
}

SteeringVector diff(const Model& model, const PromptLayout& positive,
                    const std::vector<std::vector<float>>& vp,
                    const std::vector<std::vector<float>>& vn,
                    const PromptLayout& negative) {
    SteeringVector out;
    out.per_layer.resize(model.config.n_layers);
    for (int l = 0; l < model.config.n_layers; ++l) {
        out.per_layer[l].resize(model.config.d_model);
        for (int i = 0; i < model.config.d_model; ++i) {
            out.per_layer[l][i] = vp[l][i] - vn[l][i];
        }
    }
    out.positive_id = positive.content_hash();
    out.negative_id = negative.content_hash();
    return out;
}

} // namespace

SteeringVector build_vsv(const Model& model, const PromptLayout& positive,
                         const PromptLayout& negative) {
    check_pair(positive, negative);
    auto vp = vectorize(model, positive);
    auto vn = vectorize(model, negative);
    return diff(model, positive, vp, vn, negative);
}

const std::vector<std::vector<float>>& NegativeCache::vectorize_negative(
    const Model& model, const PromptLayout& negative) {
    uint64_t key = negative.content_hash();
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = entries_.find(key);
        if (it != entries_.end()) return it->second;
    }
    auto vn = vectorize(model, negative);
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, _] = entries_.emplace(key, std::move(vn));
    return it->second;
}

SteeringVector build_vsv_cached(const Model& model, const PromptLayout& positive,
                                const PromptLayout& negative, NegativeCache& cache) {
    check_pair(positive, negative);
    const auto& vn = cache.vectorize_negative(model, negative);
    auto vp = vectorize(model, positive);
    return diff(model, positive, vp, vn, negative);
}

void save_vsv(const SteeringVector& vsv, const std::string& dir) {
    TensorArchive ar;
    ar.meta = {
        {"kind", "vsv"},
        {"n_layers", vsv.n_layers()},
        {"d_model", vsv.per_layer.empty() ? 0 : static_cast<int>(vsv.per_layer[0].size())},
        {"positive_id", vsv.positive_id},
        {"negative_id", vsv.negative_id},
    };
    for (int l = 0; l < vsv.n_layers(); ++l) {
        ar.add("vsv.layer." + std::to_string(l + 1),
               {static_cast<int64_t>(vsv.per_layer[l].size())}, vsv.per_layer[l]);
    }
    ar.save(dir);
}

SteeringVector load_vsv(const std::string& manifest_path) {
    TensorArchive ar = TensorArchive::load(manifest_path);
    if (ar.meta.value("kind", "") != "vsv") {
        throw std::runtime_error("load_vsv: archive is not a steering-vector archive");
    }
    SteeringVector out;
    int L = ar.meta.at("n_layers").get<int>();
    out.per_layer.resize(L);
    for (int l = 0; l < L; ++l) {
        out.per_layer[l] = ar.at("vsv.layer." + std::to_string(l + 1)).data;
    }
    out.positive_id = ar.meta.value("positive_id", 0ull);
    out.negative_id = ar.meta.value("negative_id", 0ull);
    return out;
}

} // namespace vista
