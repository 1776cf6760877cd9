#include "vista/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include "vista/util.hpp"

namespace vista {

double object_f1(const std::set<TokenId>& mentioned, const std::set<TokenId>& truth) {
    if (mentioned.empty() || truth.empty()) return 0.0;
    size_t hit = 0;
    for (TokenId t : mentioned) hit += truth.count(t);
    if (hit == 0) return 0.0;
    double precision = static_cast<double>(hit) / static_cast<double>(mentioned.size());
    double recall = static_cast<double>(hit) / static_cast<double>(truth.size());
    return 2.0 * precision * recall / (precision + recall);
}

ChairReport chair(const std::vector<CaptionObjects>& batch) {
    if (batch.empty()) throw std::invalid_argument("chair: empty batch");
    ChairReport r;
    r.captions = batch.size();
    double f1_sum = 0.0;
    for (const auto& c : batch) {
        size_t halluc = 0;
        for (TokenId t : c.mentioned) {
            if (!c.truth.count(t)) ++halluc;
        }
        r.mentioned_objects += c.mentioned.size();
        r.hallucinated_objects += halluc;
        if (halluc > 0) ++r.captions_with_hallucination;
        f1_sum += object_f1(c.mentioned, c.truth);
    }
    r.chair_s = static_cast<double>(r.captions_with_hallucination) / static_cast<double>(r.captions);
    if (r.mentioned_objects == 0) {
        r.chair_i = 0.0;
        r.degenerate = true;
    } else {
        r.chair_i = static_cast<double>(r.hallucinated_objects) / static_cast<double>(r.mentioned_objects);
    }
    r.f1 = f1_sum / static_cast<double>(r.captions);
    return r;
}

nlohmann::json chair_report_to_json(const ChairReport& r) {
    return {
        {"chair_s", r.chair_s},
        {"chair_i", r.chair_i},
        {"f1", r.f1},
        {"counts",
         {{"captions", r.captions},
          {"captions_with_hallucination", r.captions_with_hallucination},
          {"mentioned_objects", r.mentioned_objects},
          {"hallucinated_objects", r.hallucinated_objects}}},
        {"degenerate", r.degenerate},
    };
}

std::string chair_report_csv_row(const ChairReport& r) {
    return fmt_float(r.chair_s) + "," + fmt_float(r.chair_i) + "," + fmt_float(r.f1);
}

} // namespace vista
