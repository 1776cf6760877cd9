#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "vista/decoding.hpp"
#include "vista/model.hpp"

namespace vista {

struct Scene;

// Layer x step lens ranks for one token. rank 1 is the highest logit; ties
// resolve by ascending token id so ranks at any cell are a permutation of
// 1..V over the vocabulary.
struct RankingMatrix {
    TokenId token = 0;
    int n_layers = 0;
    int steps = 0;
    std::vector<int> rank; // [n_layers][steps], layer l in 1..L at row l-1

    int at(int l, int t) const { return rank[static_cast<size_t>(l - 1) * steps + t]; }
};

enum class TokenCategory { DecodedGenuine = 0, HiddenGenuine = 1, Hallucinated = 2 };
constexpr int kNumCategories = 3;
std::string category_name(TokenCategory c);

// Pairwise-disjoint by construction: decoded/hidden split the ground truth by
// mention, hallucinated are mentioned object tokens outside the ground truth.
struct TokenCategories {
    std::set<TokenId> decoded_genuine;
    std::set<TokenId> hidden_genuine;
    std::set<TokenId> hallucinated;

    bool category_of(TokenId t, TokenCategory& out) const;
};

struct MeanCell {
    double sum = 0.0;
    size_t count = 0;
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    bool valid() const { return count > 0; }
};

enum class Stage { Early = 0, Mid = 1, Late = 2 };
std::string stage_name(Stage s);

// Mean rank per category and generation stage over the trailing layer window.
struct StageSummary {
    int layer_window = 5;
    std::array<std::array<MeanCell, 3>, kNumCategories> cells; // [category][stage]

    const MeanCell& cell(TokenCategory c, Stage s) const {
        return cells[static_cast<int>(c)][static_cast<int>(s)];
    }
};

struct LayerSummary {
    int n_layers = 0;
    std::vector<std::array<MeanCell, kNumCategories>> per_layer; // [layer-1][category]
};

// Three near-equal stage buckets over steps 1..T; any remainder goes to the
// earliest stages. Returns per-stage [begin, end) step index pairs.
std::array<std::pair<int, int>, 3> stage_bounds(int steps);

// 1 + |{j : logit_j > logit_token}| + |{j < token : logit_j == logit_token}|.
int rank_token(const std::vector<float>& logits, TokenId token);

// Lens every captured (l, t) cell once and rank one token.
RankingMatrix build_ranking_matrix(const Model& model, const ResidualTrace& trace, TokenId token);

// Same, sharing the per-cell lens pass across many tokens.
std::vector<RankingMatrix> build_ranking_matrices(const Model& model, const ResidualTrace& trace,
                                                  const std::vector<TokenId>& tokens);

// Ground-truth classification: mentioned object tokens against the scene's
// object set (multi-token names are represented by their first token
// throughout the synthetic vocabulary, so tokens are the unit here).
TokenCategories classify_tokens(const Generation& gen, const Scene& scene);

StageSummary temporal_summary(const std::vector<RankingMatrix>& matrices,
                              const TokenCategories& categories, int layer_window = 5);

LayerSummary layerwise_summary(const std::vector<RankingMatrix>& matrices,
                               const TokenCategories& categories);

// CSV export: rows are layers 1..L top-down, columns steps.
std::string ranking_matrix_csv(const RankingMatrix& m);
RankingMatrix ranking_matrix_from_csv(const std::string& csv);

nlohmann::json stage_summary_to_json(const StageSummary& s);
nlohmann::json layer_summary_to_json(const LayerSummary& s);

// SVG heatmap of a ranking matrix: linear color map over log-rank, darker is
// better (rank 1), layers on the vertical axis, steps on the horizontal.
std::string ranking_matrix_svg(const RankingMatrix& m, int vocab_size);

} // namespace vista
