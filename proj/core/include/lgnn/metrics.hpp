#pragma once

#include <span>

namespace lgnn {

/// ROC AUC via midranks (Mann–Whitney): P(s+ > s-) + ½·P(s+ = s-).
/// Throws MetricUndefinedError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Scores >= threshold count as positive predictions. Precision is 0 when
/// nothing is predicted positive; F1 is 0 when precision + recall is 0.
Prf precision_recall_f1(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

}  // namespace lgnn
