#pragma once

#include <set>
#include <vector>

#include "json.hpp"

#include "vista/model.hpp"

namespace vista {

struct CaptionObjects {
    std::set<TokenId> mentioned;
    std::set<TokenId> truth;
};

struct ChairReport {
    double chair_s = 0.0; // captions with >= 1 hallucinated object / captions
    double chair_i = 0.0; // hallucinated object mentions / object mentions
    double f1 = 0.0;      // macro-averaged per-caption object F1
    size_t captions = 0;
    size_t captions_with_hallucination = 0;
    size_t mentioned_objects = 0;
    size_t hallucinated_objects = 0;
    // A batch with zero total mentions has no defined chair_i; it is reported
    // as 0 with this flag set instead of NaN.
    bool degenerate = false;
};

ChairReport chair(const std::vector<CaptionObjects>& batch);

// Harmonic mean of object precision and recall; 0 when either denominator is 0.
double object_f1(const std::set<TokenId>& mentioned, const std::set<TokenId>& truth);

nlohmann::json chair_report_to_json(const ChairReport& r);
// CSV row compatible with the harness's ablation tables.
std::string chair_report_csv_row(const ChairReport& r);

} // namespace vista
