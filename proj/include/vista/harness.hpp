#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "vista/analysis.hpp"
#include "vista/decoding.hpp"
#include "vista/metrics.hpp"
#include "vista/synthetic.hpp"

namespace vista {

// One named decoding variant inside an experiment. Unset fields fall back to
// the experiment defaults.
struct VariantSpec {
    std::string name;
    Strategy strategy = Strategy::Greedy;
    bool steering = false;
    bool sla = false;
    float lambda = 0.17f;
    float gamma = 0.3f;
    int window = 5;
    int beam_width = 5;
    float top_p = 0.9f;
    int max_new_tokens = 64;
};

struct ExperimentConfig {
    std::string model_archive; // empty: build the toy model below
    ToyModelSpec toy;
    int scene_count = 100;
    int objects_per_scene = 5;
    uint64_t scene_seed = 11;
    std::string scene_path; // non-empty: load scenes instead of generating
    uint64_t run_seed = 1234;
    int layer_window = 5;
    std::vector<VariantSpec> variants;
    // Ablation axes (row x column); values are interpreted by `axis` name:
    // "window", "gamma", "lambda" or "rho".
    std::string row_axis = "window";
    std::vector<double> row_values{1, 2, 3, 4, 5};
    std::string col_axis = "gamma";
    std::vector<double> col_values{0.1, 0.2, 0.3, 0.4};
    std::string out_dir = "out";
    bool emit_svg = false;

    void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides);

struct TimingSummary {
    double mean_ms_per_token = 0.0;   // first token excluded (prefill amortization)
    double median_ms_per_token = 0.0;
    double tokens_per_second = 0.0;
    double factor_vs_baseline = 1.0;
    size_t tokens = 0;
};

TimingSummary latency_report(const std::vector<std::vector<double>>& per_gen_step_ms);
nlohmann::json timing_summary_to_json(const TimingSummary& t);

struct VariantResult {
    std::string name;
    ChairReport chair_report;
    StageSummary stage_summary;   // categories from each scene's own generation
    LayerSummary layer_summary;
    TimingSummary timing;
    std::vector<int> failed_scenes;
    std::vector<Generation> generations; // indexed by scene
};

struct FileEntry {
    std::string path;
    std::string checksum;
    bool deterministic = true;
};

struct RunManifest {
    std::string config_hash;
    std::vector<VariantResult> variants;
    std::vector<FileEntry> files;
};

// Per scene x variant: build the VSV (when enabled), generate, classify, rank
// and score; aggregates reports and persists everything under cfg.out_dir.
// Scenes run in parallel; reports are identical for any worker count. A
// failing scene is logged, excluded from aggregates and does not abort the
// variant.
RunManifest run_experiment(const ExperimentConfig& cfg);

struct Matrix2D {
    std::string row_axis, col_axis;
    std::vector<double> row_values, col_values;
    std::vector<double> values; // [rows][cols]

    double at(size_t r, size_t c) const { return values[r * col_values.size() + c]; }
};

struct AblationReport {
    Matrix2D chair_s, chair_i, f1;
    ChairReport baseline; // vanilla greedy on the same scenes
};

// CHAIR_S / CHAIR_I / F1 matrices over the configured axes, plus a vanilla
// baseline. Cell seeds derive from the cell parameters alone, so any cell is
// reproducible in isolation.
AblationReport ablation_grid(const ExperimentConfig& cfg);
void write_ablation_report(const AblationReport& rep, const ExperimentConfig& cfg);

std::string matrix_csv(const Matrix2D& m);
Matrix2D matrix_from_csv(const std::string& csv);
// CSV always; SVG (fixed-size grid, linear color map, labeled axes, value in
// a <title> tooltip) when svg_path is non-empty.
void export_heatmap(const Matrix2D& m, const std::string& csv_path, const std::string& svg_path);
std::string matrix_svg(const Matrix2D& m);

// Resolve an output directory against the VISTA_OUT_ROOT environment variable.
std::string resolve_out_dir(const std::string& dir);

// Shared wiring used by run_experiment and the acceptance suite.
Model resolve_model(const ExperimentConfig& cfg);
std::vector<Scene> resolve_scenes(const ExperimentConfig& cfg);
DecodeConfig make_decode_config(const VariantSpec& v, const SteeringVector* vsv,
                                uint64_t rng_seed, bool capture);
uint64_t variant_scene_seed(const ExperimentConfig& cfg, const std::string& variant_tag, int scene_idx);

} // namespace vista
