#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lgnn/graph.hpp"
#include "lgnn/random.hpp"
#include "lgnn/tensor.hpp"

namespace lgnn::testing {

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Tensor t(rows, cols);
    for (double& v : t.data()) v = nd(rng);
    return t;
}

inline std::vector<Lesion> random_lesions(Rng& rng, std::size_t n, std::size_t feature_dim) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<Lesion> out(n);
    for (Lesion& l : out) {
        l.position = {u(rng), u(rng), u(rng)};
        l.features.resize(feature_dim);
        for (double& f : l.features) f = nd(rng);
    }
    return out;
}

// tau large enough that edge weights are not all at the floor
inline LesionGraph random_graph(Rng& rng, std::size_t n, std::size_t feature_dim, std::size_t k = 5,
                                double tau = 0.5) {
    GraphConfig cfg;
    cfg.k = k;
    cfg.tau = tau;
    return build_graph("G", random_lesions(rng, n, feature_dim), 0, cfg);
}

inline std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

// new node a holds old node perm[a]; edges rebuilt from the permuted lesions
inline LesionGraph permuted_graph(const LesionGraph& g, const std::vector<std::size_t>& perm,
                                  const GraphConfig& cfg) {
    std::vector<Lesion> lesions;
    for (std::size_t a : perm) lesions.push_back(g.lesions[a]);
    return build_graph(g.patient_id, std::move(lesions), g.label, cfg);
}

}  // namespace lgnn::testing

#include <functional>

#include "lgnn/autodiff.hpp"

namespace lgnn::testing {

// Central-difference check over every entry of `params`; error per entry is
// |analytic - numeric| / max(1, |numeric|), like check_gradients.
inline double max_param_grad_error(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& loss,
                                   double h = 1e-5) {
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        tape.backward(loss(tape));
    }
    auto eval = [&]() {
        Tape tape;
        return loss(tape).value().item();
    };
    double worst = 0.0;
    for (Parameter* p : params) {
        const Tensor analytic = p->grad;
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + h;
            const double up = eval();
            p->value[i] = saved - h;
            const double down = eval();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
        }
    }
    return worst;
}

}  // namespace lgnn::testing
