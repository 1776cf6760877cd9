#include "vista/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vista/synthetic.hpp"
#include "vista/util.hpp"

namespace vista {

std::string category_name(TokenCategory c) {
    switch (c) {
        case TokenCategory::DecodedGenuine: return "decoded_genuine";
        case TokenCategory::HiddenGenuine: return "hidden_genuine";
        case TokenCategory::Hallucinated: return "hallucinated";
    }
    return "";
}

std::string stage_name(Stage s) {
    switch (s) {
        case Stage::Early: return "early";
        case Stage::Mid: return "mid";
        case Stage::Late: return "late";
    }
    return "";
}

bool TokenCategories::category_of(TokenId t, TokenCategory& out) const {
    if (decoded_genuine.count(t)) { out = TokenCategory::DecodedGenuine; return true; }
    if (hidden_genuine.count(t)) { out = TokenCategory::HiddenGenuine; return true; }
    if (hallucinated.count(t)) { out = TokenCategory::Hallucinated; return true; }
    return false;
}

int rank_token(const std::vector<float>& logits, TokenId token) {
    if (token < 0 || token >= static_cast<TokenId>(logits.size())) {
        throw std::invalid_argument("rank_token: token out of range");
    }
    const float ref = logits[token];
    int rank = 1;
    for (int j = 0; j < static_cast<int>(logits.size()); ++j) {
        if (logits[j] > ref || (logits[j] == ref && j < token)) ++rank;
    }
    return rank;
}

std::vector<RankingMatrix> build_ranking_matrices(const Model& model, const ResidualTrace& trace,
                                                  const std::vector<TokenId>& tokens) {
    if (trace.steps == 0 || trace.hidden.empty()) {
        throw std::invalid_argument("ranking matrix: trace was not captured");
    }
    const int L = trace.n_layers;
    const int T = trace.steps;
    std::vector<RankingMatrix> out(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        out[i].token = tokens[i];
        out[i].n_layers = L;
        out[i].steps = T;
        out[i].rank.resize(static_cast<size_t>(L) * T);
    }
    for (int t = 0; t < T; ++t) {
        for (int l = 1; l <= L; ++l) {
            auto logits = logit_lens(model, trace.h(t, l));
            for (size_t i = 0; i < tokens.size(); ++i) {
                out[i].rank[static_cast<size_t>(l - 1) * T + t] = rank_token(logits, tokens[i]);
            }
        }
    }
    return out;
}

RankingMatrix build_ranking_matrix(const Model& model, const ResidualTrace& trace, TokenId token) {
    return build_ranking_matrices(model, trace, {token})[0];
}

TokenCategories classify_tokens(const Generation& gen, const Scene& scene) {
    std::set<TokenId> mentioned;
    for (TokenId t : gen.tokens) {
        if (scene.is_object_token(t)) mentioned.insert(t);
    }
    TokenCategories cat;
    auto truth = scene.object_set();
    for (TokenId t : mentioned) {
        if (truth.count(t)) cat.decoded_genuine.insert(t);
        else cat.hallucinated.insert(t);
    }
    for (TokenId t : truth) {
        if (!mentioned.count(t)) cat.hidden_genuine.insert(t);
    }
    return cat;
}

std::array<std::pair<int, int>, 3> stage_bounds(int steps) {
    if (steps < 3) throw std::invalid_argument("stage_bounds: need at least 3 steps");
    const int base = steps / 3;
    const int rem = steps % 3;
    std::array<std::pair<int, int>, 3> out;
    int start = 0;
    for (int s = 0; s < 3; ++s) {
        int size = base + (s < rem ? 1 : 0);
        out[s] = {start, start + size};
        start += size;
    }
    return out;
}

StageSummary temporal_summary(const std::vector<RankingMatrix>& matrices,
                              const TokenCategories& categories, int layer_window) {
    if (matrices.empty()) throw std::invalid_argument("temporal_summary: no matrices");
    const int L = matrices[0].n_layers;
    const int T = matrices[0].steps;
    if (layer_window < 1 || layer_window > L) {
        throw std::invalid_argument("temporal_summary: layer_window out of range");
    }
    auto stages = stage_bounds(T);

    StageSummary out;
    out.layer_window = layer_window;
    for (const auto& m : matrices) {
        TokenCategory c;
        if (!categories.category_of(m.token, c)) continue;
        for (int s = 0; s < 3; ++s) {
            auto& cell = out.cells[static_cast<int>(c)][s];
            for (int l = L - layer_window + 1; l <= L; ++l) {
                for (int t = stages[s].first; t < stages[s].second; ++t) {
                    cell.sum += m.at(l, t);
                    cell.count += 1;
                }
            }
        }
    }
    return out;
}

LayerSummary layerwise_summary(const std::vector<RankingMatrix>& matrices,
                               const TokenCategories& categories) {
    if (matrices.empty()) throw std::invalid_argument("layerwise_summary: no matrices");
    LayerSummary out;
    out.n_layers = matrices[0].n_layers;
    out.per_layer.resize(out.n_layers);
    for (const auto& m : matrices) {
        TokenCategory c;
        if (!categories.category_of(m.token, c)) continue;
        for (int l = 1; l <= m.n_layers; ++l) {
            auto& cell = out.per_layer[l - 1][static_cast<int>(c)];
            for (int t = 0; t < m.steps; ++t) {
                cell.sum += m.at(l, t);
                cell.count += 1;
            }
        }
    }
    return out;
}

std::string ranking_matrix_csv(const RankingMatrix& m) {
    std::ostringstream os;
    os << "layer";
    for (int t = 1; t <= m.steps; ++t) os << ",step_" << t;
    os << "\n";
    for (int l = 1; l <= m.n_layers; ++l) {
        os << l;
        for (int t = 0; t < m.steps; ++t) os << "," << m.at(l, t);
        os << "\n";
    }
    return os.str();
}

RankingMatrix ranking_matrix_from_csv(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("ranking csv: empty");
    RankingMatrix m;
    std::vector<std::vector<int>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<int> row;
        bool first = true;
        while (std::getline(ls, cell, ',')) {
            if (first) { first = false; continue; }
            row.push_back(std::stoi(cell));
        }
        rows.push_back(std::move(row));
    }
    m.n_layers = static_cast<int>(rows.size());
    m.steps = rows.empty() ? 0 : static_cast<int>(rows[0].size());
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != m.steps) throw std::runtime_error("ranking csv: ragged rows");
        m.rank.insert(m.rank.end(), r.begin(), r.end());
    }
    return m;
}

nlohmann::json stage_summary_to_json(const StageSummary& s) {
    nlohmann::json j;
    j["layer_window"] = s.layer_window;
    for (int c = 0; c < kNumCategories; ++c) {
        nlohmann::json jc;
        for (int st = 0; st < 3; ++st) {
            const auto& cell = s.cells[c][st];
            jc[stage_name(static_cast<Stage>(st))] = {
                {"mean_rank", cell.valid() ? nlohmann::json(cell.mean()) : nlohmann::json()},
                {"count", cell.count},
            };
        }
        j[category_name(static_cast<TokenCategory>(c))] = jc;
    }
    return j;
}

nlohmann::json layer_summary_to_json(const LayerSummary& s) {
    nlohmann::json j = nlohmann::json::array();
    for (int l = 1; l <= s.n_layers; ++l) {
        nlohmann::json jl;
        jl["layer"] = l;
        for (int c = 0; c < kNumCategories; ++c) {
            const auto& cell = s.per_layer[l - 1][c];
            jl[category_name(static_cast<TokenCategory>(c))] =
                cell.valid() ? nlohmann::json(cell.mean()) : nlohmann::json();
        }
        j.push_back(jl);
    }
    return j;
}

std::string ranking_matrix_svg(const RankingMatrix& m, int vocab_size) {
    const int cell = 12;
    const int margin = 28;
    const int w = margin + m.steps * cell + 8;
    const int h = margin + m.n_layers * cell + 8;
    const double log_v = std::log(static_cast<double>(std::max(vocab_size, 2)));

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<text x=\"" << margin << "\" y=\"12\" font-size=\"10\">steps &#8594;  (token " << m.token
       << ", darker = better rank)</text>\n";
    os << "<text x=\"4\" y=\"" << margin + 10 << "\" font-size=\"10\">L</text>\n";
    for (int l = 1; l <= m.n_layers; ++l) {
        for (int t = 0; t < m.steps; ++t) {
            // Linear map over log-rank: rank 1 -> dark, rank V -> light.
            double f = std::log(static_cast<double>(m.at(l, t))) / log_v;
            int shade = static_cast<int>(std::lround(40.0 + 215.0 * std::min(1.0, std::max(0.0, f))));
            int x = margin + t * cell;
            int y = margin + (l - 1) * cell;
            os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"rgb(" << shade << "," << shade << "," << shade << ")\">"
               << "<title>layer " << l << ", step " << t + 1 << ": rank " << m.at(l, t)
               << "</title></rect>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace vista
