#pragma once

#include "tgx/common.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace tgx {

// Average precision with step-function interpolation; ties broken by
// descending score then input order.
inline double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    require(scores.size() == labels.size() && !scores.empty(), "average_precision: bad input");
    long long n_pos = std::count(labels.begin(), labels.end(), 1);
    long long n_neg = static_cast<long long>(labels.size()) - n_pos;
    require(n_pos > 0 && n_neg > 0, "average_precision: need at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    double ap = 0.0;
    long long tp = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (labels[order[r]] == 1) {
            ++tp;
            ap += static_cast<double>(tp) / static_cast<double>(r + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

// Rank of the true candidate among negatives with average-rank tie handling.
inline double rank_of_true(double true_score, const std::vector<double>& negative_scores) {
    double better = 0.0, ties = 0.0;
    for (double s : negative_scores) {
        if (s > true_score) better += 1.0;
        else if (s == true_score) ties += 1.0;
    }
    return 1.0 + better + ties / 2.0;
}

inline double reciprocal_rank(double true_score, const std::vector<double>& negative_scores) {
    return 1.0 / rank_of_true(true_score, negative_scores);
}

// Ranking AUC of scores against a binary indicator, average-rank ties.
inline double ranking_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    require(scores.size() == positive.size(), "ranking_auc: size mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double n_pos = 0, n_neg = 0, rank_sum = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (positive[order[k]]) rank_sum += avg_rank;
        i = j;
    }
    for (std::size_t k = 0; k < positive.size(); ++k)
        (positive[k] ? n_pos : n_neg) += 1.0;
    require(n_pos > 0 && n_neg > 0, "ranking_auc: need both classes");
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

} // namespace tgx
