#include "lgnn/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgnn/error.hpp"

namespace lgnn {

namespace {

void require_projection(const Tensor& z, const Tensor& p) {
    if (p.cols() != 1 || p.rows() != z.cols()) {
        throw ShapeError("projection vector " + p.shape_string() + " does not match features " + z.shape_string());
    }
    if (std::all_of(p.data().begin(), p.data().end(), [](double v) { return v == 0.0; })) {
        throw NumericError("projection vector p has zero norm");
    }
}

}  // namespace

Var compute_scores(Var z_hat, Var p) {
    require_projection(z_hat.value(), p.value());
    const Var unit = div_scalar(p, l2_norm(p, kProjectionNormEps));
    return sigmoid(matmul(z_hat, unit));
}

std::vector<double> compute_scores(const Tensor& z_hat, const Tensor& p) {
    Tape tape;
    const Var s = compute_scores(tape.constant(z_hat), tape.constant(p));
    const auto d = s.value().data();
    return {d.begin(), d.end()};
}

std::size_t retained_count(std::size_t n, double r) {
    if (!(r > 0.0 && r <= 1.0)) throw ParameterError("retention ratio must lie in (0,1], got " + std::to_string(r));
    const double x = static_cast<double>(n) * r;
    const double nearest = std::round(x);
    const double snapped = std::abs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
    return std::clamp<std::size_t>(static_cast<std::size_t>(snapped), n == 0 ? 0 : 1, n);
}

std::vector<std::size_t> top_r_select(std::span<const double> scores, double r) {
    const std::size_t n = scores.size();
    if (n == 0) throw InputError("top_r_select on an empty score list");
    const std::size_t m = retained_count(n, r);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                      });
    order.resize(m);
    std::sort(order.begin(), order.end());
    return order;
}

Var apply_gate(Var z_hat, Var scores, std::span<const std::size_t> retained, GateMode mode) {
    const Var kept = gather_rows(z_hat, retained);
    if (mode == GateMode::unit) return kept;
    return scale_rows(kept, gather_rows(scores, retained));
}

PruneOutput self_prune(Var z_hat, Var p, double r, GateMode mode,
                       const std::vector<std::size_t>* frozen_selection) {
    const Var scores = compute_scores(z_hat, p);
    PruneResult result;
    result.scores.assign(scores.value().data().begin(), scores.value().data().end());
    if (frozen_selection != nullptr) {
        result.retained = *frozen_selection;
    } else {
        result.retained = top_r_select(result.scores, r);
    }
    const Var gated = apply_gate(z_hat, scores, result.retained, mode);
    result.gated_features = gated.value();
    return {gated, std::move(result)};
}

}  // namespace lgnn
