#include "vista/decoding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "vista/util.hpp"

namespace vista {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

} // namespace

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Greedy: return "greedy";
        case Strategy::Beam: return "beam";
        case Strategy::Nucleus: return "nucleus";
    }
    return "greedy";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "greedy") return Strategy::Greedy;
    if (name == "beam") return Strategy::Beam;
    if (name == "nucleus") return Strategy::Nucleus;
    throw ConfigError("unknown decoding strategy '" + name + "'");
}

void DecodeConfig::validate(const ModelConfig& model_cfg) const {
    if (beam_width < 1) throw ConfigError("decode: beam width must be >= 1");
    if (!(top_p > 0.0f && top_p <= 1.0f)) throw ConfigError("decode: top_p must be in (0, 1]");
    if (max_new_tokens < 1) throw ConfigError("decode: max_new_tokens must be >= 1");
    if (temperature <= 0.0f) throw ConfigError("decode: temperature must be > 0");
    if (steering.has_value()) {
        if (steering->lambda < 0.0f) throw ConfigError("decode: steering lambda must be >= 0");
        if (steering_vector == nullptr) throw ConfigError("decode: steering enabled without a steering vector");
    }
    if (sla.has_value()) sla->validate(model_cfg.n_layers);
}

TokenId greedy_select(const std::vector<float>& logits) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return best;
}

namespace {

// Softmax probabilities with indices sorted descending (ties by ascending id)
// and the nucleus prefix length for top_p.
struct NucleusView {
    std::vector<float> probs;     // by token id
    std::vector<int> order;       // descending probability
    int prefix = 0;               // nucleus size
    double prefix_mass = 0.0;
};

NucleusView make_nucleus(const std::vector<float>& logits, float top_p) {
    const int v = static_cast<int>(logits.size());
    NucleusView nv;
    nv.probs.resize(v);
    float mx = logits[0];
    for (float x : logits) mx = std::max(mx, x);
    double sum = 0.0;
    for (int i = 0; i < v; ++i) {
        nv.probs[i] = std::exp(logits[i] - mx);
        sum += nv.probs[i];
    }
    for (int i = 0; i < v; ++i) nv.probs[i] = static_cast<float>(nv.probs[i] / sum);

    nv.order.resize(v);
    std::iota(nv.order.begin(), nv.order.end(), 0);
    std::sort(nv.order.begin(), nv.order.end(), [&](int a, int b) {
        if (nv.probs[a] != nv.probs[b]) return nv.probs[a] > nv.probs[b];
        return a < b;
    });

    double cum = 0.0;
    nv.prefix = v;
    for (int i = 0; i < v; ++i) {
        cum += nv.probs[nv.order[i]];
        if (cum >= static_cast<double>(top_p)) {
            nv.prefix = i + 1;
            break;
        }
    }
    nv.prefix_mass = 0.0;
    for (int i = 0; i < nv.prefix; ++i) nv.prefix_mass += nv.probs[nv.order[i]];
    return nv;
}

} // namespace

std::vector<TokenId> nucleus_set(const std::vector<float>& logits, float top_p) {
    NucleusView nv = make_nucleus(logits, top_p);
    std::vector<TokenId> out(nv.order.begin(), nv.order.begin() + nv.prefix);
    std::sort(out.begin(), out.end());
    return out;
}

TokenId nucleus_sample(const std::vector<float>& logits, float top_p, Rng& rng) {
    for (float x : logits) {
        if (std::isnan(x)) throw std::runtime_error("nucleus_sample: NaN logit");
    }
    NucleusView nv = make_nucleus(logits, top_p);
    double u = rng.next_double() * nv.prefix_mass;
    double cum = 0.0;
    for (int i = 0; i < nv.prefix; ++i) {
        cum += nv.probs[nv.order[i]];
        if (u < cum) return nv.order[i];
    }
    return nv.order[nv.prefix - 1];
}

namespace {

// Shared per-step post-processing: lens the trailing window, ensemble, apply
// temperature. Returns the selection logits and records o^L / ensembled.
struct StepLogits {
    std::vector<float> selection; // what the sampler sees
};

StepLogits finish_step(const Model& model, const DecodeConfig& cfg, const StepResult& step,
                       Generation& gen) {
    const auto& mc = model.config;
    gen.step_final_logits.push_back(step.logits);

    std::vector<float> chosen = step.logits;
    if (cfg.sla.has_value()) {
        const int w = cfg.sla->window;
        std::vector<std::vector<float>> lens;
        lens.reserve(w);
        for (int l = mc.n_layers - w; l <= mc.n_layers - 1; ++l) {
            lens.push_back(logit_lens(model, step.h(l, mc.d_model)));
        }
        auto aug = augmentation_logits(lens);
        chosen = ensemble_logits(step.logits, aug, cfg.sla->gamma);
        gen.step_ensembled_logits.push_back(chosen);
    }
    if (cfg.temperature != 1.0f) {
        for (float& x : chosen) x /= cfg.temperature;
    }
    return {std::move(chosen)};
}

void append_trace_column(ResidualTrace& trace, const StepResult& step) {
    trace.hidden.insert(trace.hidden.end(), step.hiddens.begin(), step.hiddens.end());
    trace.steps += 1;
}

StepSteering step_steering(const DecodeConfig& cfg) {
    if (!cfg.steering.has_value()) return {};
    return StepSteering{cfg.steering_vector, &*cfg.steering};
}

// The final prompt element is processed as part of the first generation step
// (so it is steered); everything before it is plain prefill.
struct PromptSplit {
    PromptLayout prefix;
    bool last_is_row = false;
    TokenId last_token = 0;
    std::vector<float> last_row;
};

PromptSplit split_layout(const PromptLayout& layout) {
    if (layout.length() < 1) throw std::runtime_error("generate: empty layout");
    PromptSplit s;
    s.prefix = layout;
    if (!layout.query_tokens.empty()) {
        s.last_token = layout.query_tokens.back();
        s.prefix.query_tokens.pop_back();
    } else if (!layout.visual_rows.empty()) {
        s.last_is_row = true;
        s.last_row = layout.visual_rows.back();
        s.prefix.visual_rows.pop_back();
    } else if (!layout.visual_tokens.empty()) {
        s.last_token = layout.visual_tokens.back();
        s.prefix.visual_tokens.pop_back();
    } else {
        s.last_token = layout.system_tokens.back();
        s.prefix.system_tokens.pop_back();
    }
    return s;
}

StepResult decode_dispatch(const Model& model, KVState& kv, const PromptSplit& s,
                           const StepSteering& st, OpCounters* counters) {
    if (s.last_is_row) return decode_step_row(model, kv, {s.last_row.data(), s.last_row.size()}, st, counters);
    return decode_step(model, kv, s.last_token, st, counters);
}

} // namespace

Generation generate(const Model& model, const PromptLayout& layout, const DecodeConfig& cfg) {
    cfg.validate(model.config);
    if (cfg.strategy == Strategy::Beam) return beam_search(model, layout, cfg);

    const auto& mc = model.config;
    if (layout.length() + cfg.max_new_tokens > mc.max_seq) {
        throw std::runtime_error("generate: prompt plus budget exceeds max_seq");
    }

    Generation gen;
    if (cfg.capture_trace) {
        gen.trace = ResidualTrace{};
        gen.trace->n_layers = mc.n_layers;
        gen.trace->d_model = mc.d_model;
        gen.trace->has_components = false;
    }

    Rng rng(cfg.rng_seed);
    PromptSplit split = split_layout(layout);
    KVState kv;
    if (split.prefix.length() > 0) {
        kv = run_prefill(model, split.prefix, false).kv;
    } else {
        kv.init(mc);
    }

    StepSteering st = step_steering(cfg);
    bool pending_prompt_tail = true;
    TokenId next_input = 0;

    for (int stepi = 0; stepi < cfg.max_new_tokens; ++stepi) {
        auto t0 = Clock::now();
        StepResult step = pending_prompt_tail
                              ? decode_dispatch(model, kv, split, st, &gen.counters)
                              : decode_step(model, kv, next_input, st, &gen.counters);
        pending_prompt_tail = false;

        StepLogits sl = finish_step(model, cfg, step, gen);
        TokenId tok = cfg.strategy == Strategy::Greedy
                          ? greedy_select(sl.selection)
                          : nucleus_sample(sl.selection, cfg.top_p, rng);

        gen.tokens.push_back(tok);
        if (gen.trace) append_trace_column(*gen.trace, step);
        gen.step_ms.push_back(ms_since(t0));

        if (cfg.stop_tokens.count(tok)) break;
        next_input = tok;
    }
    return gen;
}

namespace {

struct Hypothesis {
    KVState kv;
    std::vector<TokenId> tokens;
    double score = 0.0;
    bool tail_pending = true; // last prompt element not yet decoded
    TokenId next_input = 0;
    std::vector<std::vector<float>> final_logits;
    std::vector<std::vector<float>> ens_logits;
    std::vector<float> trace_cols; // per-step [L+1][d] when capturing
};

std::vector<float> log_softmax(const std::vector<float>& logits) {
    float mx = logits[0];
    for (float x : logits) mx = std::max(mx, x);
    double sum = 0.0;
    for (float x : logits) sum += std::exp(static_cast<double>(x) - mx);
    const float lse = mx + static_cast<float>(std::log(sum));
    std::vector<float> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

} // namespace

Generation beam_search(const Model& model, const PromptLayout& layout, const DecodeConfig& cfg) {
    cfg.validate(model.config);
    const auto& mc = model.config;
    if (layout.length() + cfg.max_new_tokens > mc.max_seq) {
        throw std::runtime_error("beam_search: prompt plus budget exceeds max_seq");
    }

    Generation gen;
    Rng rng(cfg.rng_seed); // beam is deterministic; rng kept for config parity
    (void)rng;
    StepSteering st = step_steering(cfg);
    PromptSplit split = split_layout(layout);

    Hypothesis root;
    if (split.prefix.length() > 0) {
        root.kv = run_prefill(model, split.prefix, false).kv;
    } else {
        root.kv.init(mc);
    }

    std::vector<Hypothesis> live;
    live.push_back(std::move(root));
    std::vector<Hypothesis> finished;
    std::vector<double> step_times;

    const int width = cfg.beam_width;
    for (int stepi = 0; stepi < cfg.max_new_tokens && !live.empty(); ++stepi) {
        auto t0 = Clock::now();

        // Advance every live hypothesis one position and collect step logits.
        std::vector<std::vector<float>> logp_per_hyp(live.size());
        std::vector<StepResult> steps(live.size());
        for (size_t i = 0; i < live.size(); ++i) {
            Hypothesis& h = live[i];
            steps[i] = h.tail_pending ? decode_dispatch(model, h.kv, split, st, &gen.counters)
                                      : decode_step(model, h.kv, h.next_input, st, &gen.counters);
            h.tail_pending = false;
            StepLogits sl = finish_step(model, cfg, steps[i], gen);
            // finish_step appends to gen's per-step records; beam keeps its own
            // per-hypothesis history instead, so roll those back.
            h.final_logits.push_back(gen.step_final_logits.back());
            gen.step_final_logits.pop_back();
            if (cfg.sla.has_value()) {
                h.ens_logits.push_back(gen.step_ensembled_logits.back());
                gen.step_ensembled_logits.pop_back();
            }
            if (cfg.capture_trace) {
                h.trace_cols.insert(h.trace_cols.end(), steps[i].hiddens.begin(), steps[i].hiddens.end());
            }
            logp_per_hyp[i] = log_softmax(sl.selection);
        }

        // Rank all (hypothesis, token) extensions.
        struct Cand {
            double score;
            int hyp;
            TokenId tok;
        };
        std::vector<Cand> cands;
        cands.reserve(live.size() * mc.vocab_size);
        for (size_t i = 0; i < live.size(); ++i) {
            for (int t = 0; t < mc.vocab_size; ++t) {
                cands.push_back({live[i].score + logp_per_hyp[i][t], static_cast<int>(i), t});
            }
        }
        int keep = std::min<int>(width, static_cast<int>(cands.size()));
        std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), [](const Cand& a, const Cand& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.hyp != b.hyp) return a.hyp < b.hyp;
            return a.tok < b.tok;
        });

        std::vector<Hypothesis> next_live;
        for (int c = 0; c < keep; ++c) {
            const Cand& cand = cands[c];
            Hypothesis h = live[cand.hyp]; // copies KV and histories
            h.tokens.push_back(cand.tok);
            h.score = cand.score;
            h.next_input = cand.tok;
            if (cfg.stop_tokens.count(cand.tok)) {
                finished.push_back(std::move(h));
            } else {
                next_live.push_back(std::move(h));
            }
        }
        live = std::move(next_live);
        step_times.push_back(ms_since(t0));

        if (!finished.empty() && !live.empty()) {
            double best_fin = finished[0].score, best_live = live[0].score;
            for (const auto& h : finished) best_fin = std::max(best_fin, h.score);
            for (const auto& h : live) best_live = std::max(best_live, h.score);
            // Extensions only lower a score, so a finished leader is final.
            if (best_fin > best_live) break;
        }
    }

    const Hypothesis* best = nullptr;
    for (const auto& h : finished) {
        if (!best || h.score > best->score) best = &h;
    }
    if (!best) {
        for (const auto& h : live) {
            if (!best || h.score > best->score) best = &h;
        }
    }
    if (!best) throw std::runtime_error("beam_search: no hypothesis produced");

    gen.tokens = best->tokens;
    gen.step_final_logits = best->final_logits;
    gen.step_ensembled_logits = best->ens_logits;
    gen.total_score = best->score;
    gen.step_ms.assign(step_times.begin(), step_times.begin() + best->tokens.size());
    if (cfg.capture_trace) {
        ResidualTrace tr;
        tr.n_layers = mc.n_layers;
        tr.d_model = mc.d_model;
        tr.steps = static_cast<int>(best->tokens.size());
        tr.has_components = false;
        tr.hidden = best->trace_cols;
        gen.trace = std::move(tr);
    }
    return gen;
}

nlohmann::json decode_config_to_json(const DecodeConfig& cfg) {
    nlohmann::json j;
    j["strategy"] = strategy_name(cfg.strategy);
    j["beam_width"] = cfg.beam_width;
    j["top_p"] = cfg.top_p;
    j["temperature"] = cfg.temperature;
    j["max_new_tokens"] = cfg.max_new_tokens;
    j["rng_seed"] = cfg.rng_seed;
    j["stop_tokens"] = std::vector<TokenId>(cfg.stop_tokens.begin(), cfg.stop_tokens.end());
    if (cfg.steering.has_value()) {
        j["steering"] = {{"lambda", cfg.steering->lambda}, {"renormalize", cfg.steering->renormalize}};
    }
    if (cfg.sla.has_value()) {
        j["sla"] = {{"gamma", cfg.sla->gamma}, {"window", cfg.sla->window}};
    }
    return j;
}

DecodeConfig decode_config_from_json(const nlohmann::json& j) {
    DecodeConfig cfg;
    cfg.strategy = strategy_from_name(j.value("strategy", "greedy"));
    cfg.beam_width = j.value("beam_width", 1);
    cfg.top_p = j.value("top_p", 0.9f);
    cfg.temperature = j.value("temperature", 1.0f);
    cfg.max_new_tokens = j.value("max_new_tokens", 64);
    cfg.rng_seed = j.value("rng_seed", 0ull);
    if (j.contains("stop_tokens")) {
        for (auto t : j.at("stop_tokens")) cfg.stop_tokens.insert(t.get<TokenId>());
    }
    if (j.contains("steering")) {
        SteeringConfig sc;
        sc.lambda = j.at("steering").value("lambda", 0.0f);
        sc.renormalize = j.at("steering").value("renormalize", true);
        cfg.steering = sc;
    }
    if (j.contains("sla")) {
        SlaConfig sla;
        sla.gamma = j.at("sla").value("gamma", 0.0f);
        sla.window = j.at("sla").value("window", 1);
        cfg.sla = sla;
    }
    return cfg;
}

nlohmann::json generation_to_json(const DecodeConfig& cfg, const Generation& gen) {
    nlohmann::json j;
    j["config"] = decode_config_to_json(cfg);
    j["tokens"] = gen.tokens;
    j["step_ms"] = gen.step_ms;
    j["timing_nondeterministic"] = true;
    j["counters"] = {{"steering_adds", gen.counters.steering_adds},
                     {"steering_rescales", gen.counters.steering_rescales}};
    if (cfg.strategy == Strategy::Beam) j["total_score"] = gen.total_score;
    return j;
}

} // namespace vista
