#include "lgnn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "lgnn/error.hpp"

namespace lgnn {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (const int y : labels) {
        if (y != 0 && y != 1) throw InputError("roc_auc: labels must be 0 or 1");
        n_pos += static_cast<std::size_t>(y);
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw MetricUndefinedError("roc_auc needs both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of midranks (1-based) of the positives.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += midrank;
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

Prf precision_recall_f1(std::span<const double> scores, std::span<const int> labels, double threshold) {
    if (scores.size() != labels.size()) throw ShapeError("precision_recall_f1: length mismatch");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (pred && labels[i] == 1) ++tp;
        else if (pred) ++fp;
        else if (labels[i] == 1) ++fn;
    }
    if (tp + fn == 0) throw MetricUndefinedError("precision_recall_f1 needs at least one positive label");
    Prf out;
    out.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    out.f1 = out.precision + out.recall == 0.0 ? 0.0
                                               : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

}  // namespace lgnn
