#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lgnn/autodiff.hpp"

namespace lgnn {

/// Lower bound on |p| in the score denominator, so scores stay finite near p = 0.
inline constexpr double kProjectionNormEps = 1e-12;

/// Explainability payload of the self-pruning step.
struct PruneResult {
    std::vector<double> scores;          // sigmoid importance per lesion, in (0,1)
    std::vector<std::size_t> retained;   // ascending node indices
    Tensor gated_features;               // |retained| x d
};

enum class GateMode {
    score,  // retained rows scaled by their importance score
    unit,   // retained rows passed through unscaled
};

/// σ(Ẑ p / max(|p|, eps)) as an n x 1 column. Throws NumericError for p == 0.
Var compute_scores(Var z_hat, Var p);
std::vector<double> compute_scores(const Tensor& z_hat, const Tensor& p);

/// ⌈n·r⌉, with n·r values within 1e-9 of an integer snapped to it first so
/// that decimal ratios such as 0.3 do not round up spuriously.
std::size_t retained_count(std::size_t n, double r);

/// Indices of the ⌈N·r⌉ largest scores (ties favour the smaller index),
/// returned in ascending index order.
std::vector<std::size_t> top_r_select(std::span<const double> scores, double r);

/// Gathers the retained rows of Ẑ and multiplies each by its score.
Var apply_gate(Var z_hat, Var scores, std::span<const std::size_t> retained, GateMode mode = GateMode::score);

struct PruneOutput {
    Var gated;
    PruneResult result;
};

/// Full scoring → selection → gating step. `frozen_selection`, when given,
/// replaces the top-r choice (used to hold the selection fixed in gradient checks).
PruneOutput self_prune(Var z_hat, Var p, double r, GateMode mode = GateMode::score,
                       const std::vector<std::size_t>* frozen_selection = nullptr);

}  // namespace lgnn
