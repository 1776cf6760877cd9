#include "vista/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vista/util.hpp"

namespace fs = std::filesystem;

namespace vista {

namespace {

const VariantSpec kDefaults{};

VariantSpec variant_from_json(const nlohmann::json& j) {
    VariantSpec v;
    v.name = j.at("name").get<std::string>();
    v.strategy = strategy_from_name(j.value("strategy", "greedy"));
    v.steering = j.value("steering", false);
    v.sla = j.value("sla", false);
    v.lambda = j.value("lambda", kDefaults.lambda);
    v.gamma = j.value("gamma", kDefaults.gamma);
    v.window = j.value("window", kDefaults.window);
    v.beam_width = j.value("beam_width", kDefaults.beam_width);
    v.top_p = j.value("top_p", kDefaults.top_p);
    v.max_new_tokens = j.value("max_new_tokens", kDefaults.max_new_tokens);
    return v;
}

nlohmann::json variant_to_json(const VariantSpec& v) {
    return {
        {"name", v.name},
        {"strategy", strategy_name(v.strategy)},
        {"steering", v.steering},
        {"sla", v.sla},
        {"lambda", v.lambda},
        {"gamma", v.gamma},
        {"window", v.window},
        {"beam_width", v.beam_width},
        {"top_p", v.top_p},
        {"max_new_tokens", v.max_new_tokens},
    };
}

std::string variant_tag(const VariantSpec& v) {
    return variant_to_json(v).dump();
}

} // namespace

void ExperimentConfig::validate() const {
    if (variants.empty()) throw ConfigError("experiment: at least one variant is required");
    if (scene_count < 1 && scene_path.empty()) throw ConfigError("experiment: scene_count must be >= 1");
    if (row_values.empty() || col_values.empty()) {
        throw ConfigError("experiment: ablation grids must be nonempty");
    }
    for (const auto& axis : {row_axis, col_axis}) {
        if (axis != "window" && axis != "gamma" && axis != "lambda" && axis != "rho") {
            throw ConfigError("experiment: unknown ablation axis '" + axis + "'");
        }
    }
    if (layer_window < 1) throw ConfigError("experiment: layer_window must be >= 1");
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("model")) {
        const auto& jm = j.at("model");
        cfg.model_archive = jm.value("archive", "");
        if (jm.contains("toy")) {
            const auto& jt = jm.at("toy");
            cfg.toy.base.vocab_size = jt.value("vocab_size", 512);
            cfg.toy.base.n_layers = jt.value("n_layers", 8);
            cfg.toy.base.n_heads = jt.value("n_heads", 4);
            cfg.toy.base.d_model = jt.value("d_model", 64);
            cfg.toy.base.d_ff = jt.value("d_ff", 512);
            cfg.toy.base.max_seq = jt.value("max_seq", 160);
            cfg.toy.base.seed = jt.value("seed", 7ull);
            cfg.toy.prior_strength = jt.value("rho", 1.0f);
            cfg.toy.object_lo = jt.value("object_lo", 256);
            cfg.toy.object_hi = jt.value("object_hi", 512);
        }
    }
    if (j.contains("scenes")) {
        const auto& js = j.at("scenes");
        cfg.scene_count = js.value("count", 100);
        cfg.objects_per_scene = js.value("objects_per_scene", 5);
        cfg.scene_seed = js.value("seed", 11ull);
        cfg.scene_path = js.value("path", "");
    }
    cfg.run_seed = j.value("run_seed", 1234ull);
    cfg.layer_window = j.value("layer_window", 5);
    if (j.contains("variants")) {
        for (const auto& jv : j.at("variants")) cfg.variants.push_back(variant_from_json(jv));
    }
    if (j.contains("ablation")) {
        const auto& ja = j.at("ablation");
        cfg.row_axis = ja.value("row_axis", "window");
        if (ja.contains("row_values")) cfg.row_values = ja.at("row_values").get<std::vector<double>>();
        cfg.col_axis = ja.value("col_axis", "gamma");
        if (ja.contains("col_values")) cfg.col_values = ja.at("col_values").get<std::vector<double>>();
    }
    if (j.contains("output")) {
        cfg.out_dir = j.at("output").value("dir", "out");
        cfg.emit_svg = j.at("output").value("svg", false);
    }
    return cfg;
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["model"] = {
        {"archive", cfg.model_archive},
        {"toy",
         {{"vocab_size", cfg.toy.base.vocab_size},
          {"n_layers", cfg.toy.base.n_layers},
          {"n_heads", cfg.toy.base.n_heads},
          {"d_model", cfg.toy.base.d_model},
          {"d_ff", cfg.toy.base.d_ff},
          {"max_seq", cfg.toy.base.max_seq},
          {"seed", cfg.toy.base.seed},
          {"rho", cfg.toy.prior_strength},
          {"object_lo", cfg.toy.object_lo},
          {"object_hi", cfg.toy.object_hi}}},
    };
    j["scenes"] = {{"count", cfg.scene_count},
                   {"objects_per_scene", cfg.objects_per_scene},
                   {"seed", cfg.scene_seed},
                   {"path", cfg.scene_path}};
    j["run_seed"] = cfg.run_seed;
    j["layer_window"] = cfg.layer_window;
    j["variants"] = nlohmann::json::array();
    for (const auto& v : cfg.variants) j["variants"].push_back(variant_to_json(v));
    j["ablation"] = {{"row_axis", cfg.row_axis},
                     {"row_values", cfg.row_values},
                     {"col_axis", cfg.col_axis},
                     {"col_values", cfg.col_values}};
    j["output"] = {{"dir", cfg.out_dir}, {"svg", cfg.emit_svg}};
    return j;
}

namespace {

// "--set a.b.c=value" override; value parsed as JSON when possible.
void apply_override(nlohmann::json& j, const std::string& expr) {
    auto eq = expr.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + expr + "' is not key=value");
    std::string path = expr.substr(0, eq);
    std::string value = expr.substr(eq + 1);
    nlohmann::json* node = &j;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override '" + expr + "' has an empty key segment");
        if (dot == std::string::npos) {
            nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

} // namespace

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    }
    for (const auto& o : overrides) apply_override(j, o);
    ExperimentConfig cfg = experiment_config_from_json(j);
    cfg.validate();
    return cfg;
}

std::string resolve_out_dir(const std::string& dir) {
    const char* root = std::getenv("VISTA_OUT_ROOT");
    if (root && *root && !fs::path(dir).is_absolute()) {
        return (fs::path(root) / dir).string();
    }
    return dir;
}

Model resolve_model(const ExperimentConfig& cfg) {
    if (!cfg.model_archive.empty()) return load_model(cfg.model_archive);
    return build_toy_model(cfg.toy, cfg.toy.base.seed);
}

std::vector<Scene> resolve_scenes(const ExperimentConfig& cfg) {
    if (!cfg.scene_path.empty()) return load_scenes(cfg.scene_path);
    Rng rng(derive_seed(cfg.scene_seed, "scenes"));
    std::vector<Scene> scenes;
    scenes.reserve(cfg.scene_count);
    for (int i = 0; i < cfg.scene_count; ++i) {
        scenes.push_back(generate_scene(rng, cfg.objects_per_scene, cfg.toy.vocab()));
    }
    return scenes;
}

uint64_t variant_scene_seed(const ExperimentConfig& cfg, const std::string& tag, int scene_idx) {
    return derive_seed(cfg.run_seed, fnv1a64(tag), static_cast<uint64_t>(scene_idx));
}

DecodeConfig make_decode_config(const VariantSpec& v, const SteeringVector* vsv,
                                uint64_t rng_seed, bool capture) {
    DecodeConfig dc;
    dc.strategy = v.strategy;
    dc.beam_width = v.beam_width;
    dc.top_p = v.top_p;
    dc.max_new_tokens = v.max_new_tokens;
    dc.rng_seed = rng_seed;
    dc.stop_tokens = {kEndOfCaption};
    dc.capture_trace = capture;
    if (v.steering) {
        SteeringConfig sc;
        sc.lambda = v.lambda;
        sc.renormalize = true;
        dc.steering = sc;
        dc.steering_vector = vsv;
    }
    if (v.sla) {
        SlaConfig sla;
        sla.gamma = v.gamma;
        sla.window = v.window;
        dc.sla = sla;
    }
    return dc;
}

TimingSummary latency_report(const std::vector<std::vector<double>>& per_gen_step_ms) {
    TimingSummary t;
    std::vector<double> samples;
    for (const auto& gen : per_gen_step_ms) {
        // First token carries the prompt-tail decode; excluded from per-token
        // statistics (prefill amortization).
        for (size_t i = 1; i < gen.size(); ++i) samples.push_back(gen[i]);
    }
    t.tokens = samples.size();
    if (samples.empty()) return t;
    double sum = 0.0;
    for (double s : samples) sum += s;
    t.mean_ms_per_token = sum / static_cast<double>(samples.size());
    std::sort(samples.begin(), samples.end());
    size_t n = samples.size();
    t.median_ms_per_token = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    t.tokens_per_second = t.mean_ms_per_token > 0.0 ? 1000.0 / t.mean_ms_per_token : 0.0;
    return t;
}

nlohmann::json timing_summary_to_json(const TimingSummary& t) {
    return {
        {"mean_ms_per_token", t.mean_ms_per_token},
        {"median_ms_per_token", t.median_ms_per_token},
        {"tokens_per_second", t.tokens_per_second},
        {"factor_vs_baseline", t.factor_vs_baseline},
        {"tokens", t.tokens},
        {"nondeterministic", true},
    };
}

namespace {

struct SceneOutcome {
    bool ok = false;
    std::string error;
    Generation gen;
    CaptionObjects objects;
    StageSummary stages;
    LayerSummary layers;
};

void merge(MeanCell& into, const MeanCell& from) {
    into.sum += from.sum;
    into.count += from.count;
}

SceneOutcome run_one_scene(const Model& model, const Scene& scene, const VariantSpec& v,
                           const ExperimentConfig& cfg, NegativeCache& neg_cache, int scene_idx) {
    SceneOutcome out;
    SteeringVector vsv;
    if (v.steering) {
        vsv = build_vsv_cached(model, scene_layout(scene), negative_layout(), neg_cache);
    }
    DecodeConfig dc = make_decode_config(v, v.steering ? &vsv : nullptr,
                                         variant_scene_seed(cfg, variant_tag(v), scene_idx), true);
    out.gen = generate(model, scene_layout(scene), dc);

    TokenCategories cats = classify_tokens(out.gen, scene);
    out.objects.truth = scene.object_set();
    for (TokenId t : cats.decoded_genuine) out.objects.mentioned.insert(t);
    for (TokenId t : cats.hallucinated) out.objects.mentioned.insert(t);

    std::vector<TokenId> tokens;
    for (TokenId t : cats.decoded_genuine) tokens.push_back(t);
    for (TokenId t : cats.hidden_genuine) tokens.push_back(t);
    for (TokenId t : cats.hallucinated) tokens.push_back(t);
    out.stages.layer_window = std::min(cfg.layer_window, model.config.n_layers);
    out.layers.n_layers = model.config.n_layers;
    out.layers.per_layer.resize(model.config.n_layers);
    if (!tokens.empty() && out.gen.trace && out.gen.trace->steps >= 3) {
        auto mats = build_ranking_matrices(model, *out.gen.trace, tokens);
        out.stages = temporal_summary(mats, cats, out.stages.layer_window);
        out.layers = layerwise_summary(mats, cats);
    }
    out.ok = true;
    return out;
}

VariantResult run_variant(const Model& model, const std::vector<Scene>& scenes,
                          const VariantSpec& v, const ExperimentConfig& cfg,
                          NegativeCache& neg_cache) {
    const int n = static_cast<int>(scenes.size());
    std::vector<SceneOutcome> outcomes(n);

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            outcomes[i] = run_one_scene(model, scenes[i], v, cfg, neg_cache, i);
        } catch (const std::exception& e) {
            outcomes[i].ok = false;
            outcomes[i].error = e.what();
        }
    }

    VariantResult res;
    res.name = v.name;
    res.stage_summary.layer_window = std::min(cfg.layer_window, model.config.n_layers);
    res.layer_summary.n_layers = model.config.n_layers;
    res.layer_summary.per_layer.resize(model.config.n_layers);

    std::vector<CaptionObjects> batch;
    std::vector<std::vector<double>> timings;
    for (int i = 0; i < n; ++i) {
        auto& o = outcomes[i];
        if (!o.ok) {
            res.failed_scenes.push_back(i);
            res.generations.emplace_back();
            continue;
        }
        batch.push_back(o.objects);
        timings.push_back(o.gen.step_ms);
        for (int c = 0; c < kNumCategories; ++c) {
            for (int s = 0; s < 3; ++s) merge(res.stage_summary.cells[c][s], o.stages.cells[c][s]);
            for (int l = 0; l < model.config.n_layers && l < static_cast<int>(o.layers.per_layer.size()); ++l) {
                merge(res.layer_summary.per_layer[l][c], o.layers.per_layer[l][c]);
            }
        }
        o.gen.trace.reset(); // traces are bulky; drop before keeping results
        res.generations.push_back(std::move(o.gen));
    }
    if (!batch.empty()) res.chair_report = chair(batch);
    res.timing = latency_report(timings);
    return res;
}

void write_text_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

std::string checksum_of(const std::string& content) { return hex_u64(fnv1a64(content)); }

} // namespace

RunManifest run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    Model model = resolve_model(cfg);
    std::vector<Scene> scenes = resolve_scenes(cfg);
    NegativeCache neg_cache;

    RunManifest manifest;
    nlohmann::json resolved = experiment_config_to_json(cfg);
    manifest.config_hash = hex_u64(fnv1a64(resolved.dump()));

    const std::string out_root = resolve_out_dir(cfg.out_dir);
    nlohmann::json jmanifest;
    jmanifest["config"] = resolved;
    jmanifest["config_hash"] = manifest.config_hash;
    jmanifest["variants"] = nlohmann::json::object();

    std::vector<VariantResult> results;
    for (const auto& v : cfg.variants) {
        results.push_back(run_variant(model, scenes, v, cfg, neg_cache));
    }

    // Relative latency factors against the first intervention-free variant
    // (or the first variant when none is plain).
    size_t baseline_idx = 0;
    for (size_t i = 0; i < cfg.variants.size(); ++i) {
        if (!cfg.variants[i].steering && !cfg.variants[i].sla) {
            baseline_idx = i;
            break;
        }
    }
    const double base_ms = results[baseline_idx].timing.mean_ms_per_token;
    for (auto& r : results) {
        r.timing.factor_vs_baseline = base_ms > 0.0 ? r.timing.mean_ms_per_token / base_ms : 1.0;
    }

    for (size_t vi = 0; vi < results.size(); ++vi) {
        auto& r = results[vi];
        const std::string vdir = out_root + "/" + r.name;

        std::string chair_body = chair_report_to_json(r.chair_report).dump(2) + "\n";
        write_text_file(vdir + "/chair.json", chair_body);
        manifest.files.push_back({r.name + "/chair.json", checksum_of(chair_body), true});

        std::string stage_body = stage_summary_to_json(r.stage_summary).dump(2) + "\n";
        write_text_file(vdir + "/stage_summary.json", stage_body);
        manifest.files.push_back({r.name + "/stage_summary.json", checksum_of(stage_body), true});

        std::string layer_body = layer_summary_to_json(r.layer_summary).dump(2) + "\n";
        write_text_file(vdir + "/layer_summary.json", layer_body);
        manifest.files.push_back({r.name + "/layer_summary.json", checksum_of(layer_body), true});

        // Per-scene run records; step timings make these non-deterministic.
        std::ostringstream records;
        DecodeConfig report_cfg = make_decode_config(cfg.variants[vi], nullptr, 0, false);
        for (const auto& g : r.generations) {
            records << generation_to_json(report_cfg, g).dump() << "\n";
        }
        write_text_file(vdir + "/generations.jsonl", records.str());
        manifest.files.push_back({r.name + "/generations.jsonl", checksum_of(records.str()), false});

        std::string timing_body = timing_summary_to_json(r.timing).dump(2) + "\n";
        write_text_file(vdir + "/timing.json", timing_body);
        manifest.files.push_back({r.name + "/timing.json", checksum_of(timing_body), false});

        jmanifest["variants"][r.name] = {
            {"chair", chair_report_to_json(r.chair_report)},
            {"stage_summary", stage_summary_to_json(r.stage_summary)},
            {"timing", timing_summary_to_json(r.timing)},
            {"failed_scenes", r.failed_scenes},
        };
        manifest.variants.push_back(std::move(r));
    }

    nlohmann::json jfiles = nlohmann::json::array();
    for (const auto& f : manifest.files) {
        jfiles.push_back({{"path", f.path}, {"checksum", f.checksum}, {"deterministic", f.deterministic}});
    }
    jmanifest["files"] = jfiles;
    write_text_file(out_root + "/manifest.json", jmanifest.dump(2) + "\n");
    return manifest;
}

namespace {

VariantSpec cell_variant(const std::string& axis, double value, VariantSpec v) {
    if (axis == "window") {
        v.window = static_cast<int>(std::lround(value));
    } else if (axis == "gamma") {
        v.gamma = static_cast<float>(value);
    } else if (axis == "lambda") {
        v.lambda = static_cast<float>(value);
    } else if (axis != "rho") { // rho swaps the model, handled by the caller
        throw ConfigError("unknown ablation axis '" + axis + "'");
    }
    return v;
}

} // namespace

AblationReport ablation_grid(const ExperimentConfig& cfg) {
    cfg.validate();
    const bool rho_axis = cfg.row_axis == "rho" || cfg.col_axis == "rho";
    Model base_model = resolve_model(cfg);
    std::vector<Scene> scenes = resolve_scenes(cfg);
    NegativeCache neg_cache;

    VariantSpec proto;
    proto.strategy = Strategy::Greedy;
    proto.steering = true;
    proto.sla = true;

    const size_t rows = cfg.row_values.size(), cols = cfg.col_values.size();
    AblationReport rep;
    for (Matrix2D* m : {&rep.chair_s, &rep.chair_i, &rep.f1}) {
        m->row_axis = cfg.row_axis;
        m->col_axis = cfg.col_axis;
        m->row_values = cfg.row_values;
        m->col_values = cfg.col_values;
        m->values.assign(rows * cols, 0.0);
    }

    {
        VariantSpec vanilla;
        vanilla.name = "vanilla";
        vanilla.strategy = Strategy::Greedy;
        VariantResult r = run_variant(base_model, scenes, vanilla, cfg, neg_cache);
        rep.baseline = r.chair_report;
    }

    for (size_t ri = 0; ri < rows; ++ri) {
        for (size_t ci = 0; ci < cols; ++ci) {
            VariantSpec v = cell_variant(cfg.row_axis, cfg.row_values[ri], proto);
            v = cell_variant(cfg.col_axis, cfg.col_values[ci], v);
            // The cell name (and hence every sampling seed in the cell)
            // depends only on the cell parameters, so a cell re-runs
            // reproducibly on its own.
            v.name = cfg.row_axis + "=" + fmt_float(cfg.row_values[ri]) + ";" +
                     cfg.col_axis + "=" + fmt_float(cfg.col_values[ci]);

            const Model* model = &base_model;
            Model rho_model;
            if (rho_axis) {
                ToyModelSpec spec = cfg.toy;
                double rho = cfg.row_axis == "rho" ? cfg.row_values[ri] : cfg.col_values[ci];
                spec.prior_strength = static_cast<float>(rho);
                rho_model = build_toy_model(spec, spec.base.seed);
                model = &rho_model;
            }
            VariantResult r = run_variant(*model, scenes, v, cfg, neg_cache);
            rep.chair_s.values[ri * cols + ci] = r.chair_report.chair_s;
            rep.chair_i.values[ri * cols + ci] = r.chair_report.chair_i;
            rep.f1.values[ri * cols + ci] = r.chair_report.f1;
        }
    }
    return rep;
}

std::string matrix_csv(const Matrix2D& m) {
    std::ostringstream os;
    os << m.row_axis << "\\" << m.col_axis;
    for (double c : m.col_values) os << "," << fmt_float(c);
    os << "\n";
    for (size_t r = 0; r < m.row_values.size(); ++r) {
        os << fmt_float(m.row_values[r]);
        for (size_t c = 0; c < m.col_values.size(); ++c) os << "," << fmt_float(m.at(r, c));
        os << "\n";
    }
    return os.str();
}

Matrix2D matrix_from_csv(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("matrix csv: empty");
    Matrix2D m;
    {
        std::istringstream hs(line);
        std::string cell;
        bool first = true;
        while (std::getline(hs, cell, ',')) {
            if (first) {
                auto bs = cell.find('\\');
                if (bs != std::string::npos) {
                    m.row_axis = cell.substr(0, bs);
                    m.col_axis = cell.substr(bs + 1);
                }
                first = false;
            } else {
                m.col_values.push_back(std::stod(cell));
            }
        }
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        bool first = true;
        while (std::getline(ls, cell, ',')) {
            if (first) {
                m.row_values.push_back(std::stod(cell));
                first = false;
            } else {
                m.values.push_back(std::stod(cell));
            }
        }
    }
    if (m.values.size() != m.row_values.size() * m.col_values.size()) {
        throw std::runtime_error("matrix csv: ragged matrix");
    }
    return m;
}

std::string matrix_svg(const Matrix2D& m) {
    const int cell_w = 56, cell_h = 24, margin_l = 72, margin_t = 40;
    const size_t rows = m.row_values.size(), cols = m.col_values.size();
    const int w = margin_l + static_cast<int>(cols) * cell_w + 8;
    const int h = margin_t + static_cast<int>(rows) * cell_h + 8;

    double lo = 1e300, hi = -1e300;
    for (double v : m.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<text x=\"" << margin_l << "\" y=\"14\" font-size=\"11\">" << m.row_axis << " \\ "
       << m.col_axis << "</text>\n";
    for (size_t c = 0; c < cols; ++c) {
        os << "<text x=\"" << margin_l + static_cast<int>(c) * cell_w + 4 << "\" y=\"" << margin_t - 6
           << "\" font-size=\"10\">" << fmt_float(m.col_values[c]) << "</text>\n";
    }
    for (size_t r = 0; r < rows; ++r) {
        os << "<text x=\"4\" y=\"" << margin_t + static_cast<int>(r) * cell_h + 16
           << "\" font-size=\"10\">" << fmt_float(m.row_values[r]) << "</text>\n";
        for (size_t c = 0; c < cols; ++c) {
            // Linear color map: low values dark, high values bright.
            double f = (m.at(r, c) - lo) / span;
            int red = static_cast<int>(std::lround(30 + 225 * f));
            int green = static_cast<int>(std::lround(40 + 200 * f));
            int blue = static_cast<int>(std::lround(90 + 60 * (1.0 - f)));
            os << "<rect x=\"" << margin_l + static_cast<int>(c) * cell_w << "\" y=\""
               << margin_t + static_cast<int>(r) * cell_h << "\" width=\"" << cell_w << "\" height=\""
               << cell_h << "\" fill=\"rgb(" << red << "," << green << "," << blue << ")\">"
               << "<title>" << m.row_axis << "=" << fmt_float(m.row_values[r]) << ", " << m.col_axis
               << "=" << fmt_float(m.col_values[c]) << ": " << fmt_float(m.at(r, c))
               << "</title></rect>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

void export_heatmap(const Matrix2D& m, const std::string& csv_path, const std::string& svg_path) {
    if (m.values.empty()) throw std::invalid_argument("export_heatmap: empty matrix");
    write_text_file(csv_path, matrix_csv(m));
    if (!svg_path.empty()) write_text_file(svg_path, matrix_svg(m));
}

void write_ablation_report(const AblationReport& rep, const ExperimentConfig& cfg) {
    const std::string out_root = resolve_out_dir(cfg.out_dir);
    export_heatmap(rep.chair_s, out_root + "/chair_s.csv",
                   cfg.emit_svg ? out_root + "/chair_s.svg" : "");
    export_heatmap(rep.chair_i, out_root + "/chair_i.csv",
                   cfg.emit_svg ? out_root + "/chair_i.svg" : "");
    export_heatmap(rep.f1, out_root + "/f1.csv", cfg.emit_svg ? out_root + "/f1.svg" : "");
    std::string baseline = "chair_s,chair_i,f1\n" + chair_report_csv_row(rep.baseline) + "\n";
    write_text_file(out_root + "/baseline.csv", baseline);
}

} // namespace vista
