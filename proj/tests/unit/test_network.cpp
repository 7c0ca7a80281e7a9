#include "doctest.h"

#include <cmath>
#include <string>

#include "lgnn/error.hpp"
#include "lgnn/metrics.hpp"
#include "lgnn/network.hpp"
#include "support.hpp"

using namespace lgnn;

namespace {

constexpr LayerKind kKinds[] = {LayerKind::gcn, LayerKind::sage, LayerKind::edge, LayerKind::gat};

ModelConfig small_config(LayerKind kind, std::size_t f = 8) {
    ModelConfig cfg;
    cfg.layer_kind = kind;
    cfg.feature_dim = f;
    cfg.tau = 0.5;
    return cfg;
}

// Composite BCE loss with dropout masks pinned by reseeding and the SPM
// selection frozen at the unperturbed point.
struct CompositeLoss {
    const GraphContext* ctx;
    ModelParams* params;
    ModelConfig cfg;
    std::vector<std::size_t> frozen;
    Tensor target;

    Var operator()(Tape& tape) const {
        Rng rng(99);
        ForwardOptions opts;
        opts.frozen_selection = &frozen;
        return bce_loss(forward_on_tape(tape, *ctx, *params, cfg, Mode::train, rng, opts).probability, target);
    }
};

}  // namespace

TEST_CASE("config validation and json") {
    ModelConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.r = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.hidden_dims = {};
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg = {};
    cfg.layer_kind = LayerKind::gat;
    cfg.hidden_dims = hidden_dims_for_depth(3);
    cfg.r = 0.3;
    CHECK(model_config_from_json(to_json(cfg)) == cfg);
    CHECK_THROWS_AS(model_config_from_json("{"), ParseError);
    CHECK(hidden_dims_for_depth(1) == std::vector<std::size_t>{8});
    CHECK(hidden_dims_for_depth(2) == std::vector<std::size_t>{64, 8});
    CHECK(hidden_dims_for_depth(4) == std::vector<std::size_t>{64, 64, 64, 8});
}

TEST_CASE("parameter shapes follow the dimension chain") {
    Rng rng(51);
    const ModelParams p = init_params(ModelConfig{}, rng);
    REQUIRE(p.layers.size() == 2);
    CHECK(p.layers[0].weight.value.rows() == 16);
    CHECK(p.layers[0].weight.value.cols() == 64);
    CHECK(p.layers[1].weight.value.cols() == 8);
    CHECK(p.projection.value.rows() == 8);
    REQUIRE(p.head.size() == 2);
    CHECK(p.head[0].weight.value.rows() == 8);
    CHECK(p.head[0].weight.value.cols() == 8);
    CHECK(p.head[1].weight.value.cols() == 1);
}

TEST_CASE("zero final head layer gives one half") {
    Rng rng(52);
    for (LayerKind kind : kKinds) {
        const ModelConfig cfg = small_config(kind);
        ModelParams p = init_params(cfg, rng);
        p.head.back().weight.value.fill(0.0);
        const LesionGraph g = testing::random_graph(rng, 9, 8);
        CHECK(forward(g, p, cfg, Mode::eval, rng).probability == 0.5);
    }
}

TEST_CASE("spm bypass equals full retention with unit gates") {
    Rng rng(53);
    for (LayerKind kind : kKinds) {
        ModelConfig with = small_config(kind);
        with.r = 1.0;
        ModelConfig without = with;
        without.use_spm = false;
        const ModelParams p = init_params(with, rng);
        for (int trial = 0; trial < 10; ++trial) {
            const LesionGraph g = testing::random_graph(rng, 2 + trial, 8);
            ForwardOptions unit;
            unit.gate = GateMode::unit;
            const double a = forward(g, p, with, Mode::eval, rng, unit).logit;
            const double b = forward(g, p, without, Mode::eval, rng).logit;
            CHECK(std::abs(a - b) <= 1e-12);
        }
    }
}

TEST_CASE("prediction is invariant to node order") {
    Rng rng(54);
    for (LayerKind kind : kKinds) {
        CAPTURE(std::string(to_string(kind)));
        const ModelConfig cfg = small_config(kind);
        const ModelParams p = init_params(cfg, rng);
        ModelConfig sp_cfg = cfg;
        sp_cfg.architecture = Architecture::set_proc;
        const ModelParams sp = init_params(sp_cfg, rng);
        for (int trial = 0; trial < 5; ++trial) {
            const LesionGraph g = testing::random_graph(rng, 12, 8, cfg.k, cfg.tau);
            const double base = forward(g, p, cfg, Mode::eval, rng).probability;
            const double sp_base = set_proc_forward(g, sp, sp_cfg, Mode::eval, rng).probability;
            CHECK(base > 0.0);
            CHECK(base < 1.0);
            for (int k = 0; k < 10; ++k) {
                const LesionGraph pg = testing::permuted_graph(g, testing::random_permutation(rng, 12), cfg.graph_config());
                CHECK(std::abs(forward(pg, p, cfg, Mode::eval, rng).probability - base) <= 1e-9);
                CHECK(std::abs(set_proc_forward(pg, sp, sp_cfg, Mode::eval, rng).probability - sp_base) <= 1e-9);
            }
        }
    }
}

TEST_CASE("eval forward is deterministic") {
    Rng rng(55);
    const ModelConfig cfg = small_config(LayerKind::gcn);
    const ModelParams p = init_params(cfg, rng);
    const LesionGraph g = testing::random_graph(rng, 10, 8);
    const ForwardResult a = forward(g, p, cfg, Mode::eval, rng);
    const ForwardResult b = forward(g, p, cfg, Mode::eval, rng);
    CHECK(a.logit == b.logit);
    CHECK(a.pruning.scores == b.pruning.scores);
}

TEST_CASE("feature dimension mismatch is a shape error") {
    Rng rng(56);
    const ModelConfig cfg = small_config(LayerKind::gcn, 6);
    const ModelParams p = init_params(cfg, rng);
    const LesionGraph g = testing::random_graph(rng, 4, 8);
    CHECK_THROWS_AS(forward(g, p, cfg, Mode::eval, rng), ShapeError);
}

TEST_CASE("set-proc ignores edges") {
    Rng rng(57);
    ModelConfig cfg = small_config(LayerKind::gcn);
    cfg.architecture = Architecture::set_proc;
    const ModelParams p = init_params(cfg, rng);
    LesionGraph g = testing::random_graph(rng, 1, 8);
    LesionGraph bare = g;
    bare.edges.clear();
    CHECK(set_proc_forward(g, p, cfg, Mode::eval, rng).logit == set_proc_forward(bare, p, cfg, Mode::eval, rng).logit);

    LesionGraph h = testing::random_graph(rng, 9, 8);
    const double base = set_proc_forward(h, p, cfg, Mode::eval, rng).logit;
    h.edges.pop_back();
    for (Edge& e : h.edges) e.weight = 0.5;
    h.edges.push_back({0, 8, 1.0});
    CHECK(set_proc_forward(h, p, cfg, Mode::eval, rng).logit == base);
}

TEST_CASE("mean feature vector") {
    Rng rng(58);
    LesionGraph g;
    CHECK_THROWS_AS(mean_feature_vector(g), InputError);
    g.lesions.resize(1);
    g.lesions[0].features = {1.0, -2.0};
    CHECK(mean_feature_vector(g) == std::vector<double>{1.0, -2.0});
    g.lesions.resize(2);
    g.lesions[1].features = {-1.0, 2.0};
    CHECK(mean_feature_vector(g) == std::vector<double>{0.0, 0.0});
    const LesionGraph r = testing::random_graph(rng, 8, 5);
    const auto m = mean_feature_vector(r);
    for (std::size_t c = 0; c < 5; ++c) {
        double s = 0.0;
        for (const Lesion& l : r.lesions) s += l.features[c];
        CHECK(std::abs(m[c] - s / 8.0) < 1e-15);
    }
}

TEST_CASE("gradient of the composite loss for every layer kind") {
    Rng rng(59);
    for (LayerKind kind : kKinds) {
        CAPTURE(std::string(to_string(kind)));
        const ModelConfig cfg = small_config(kind);
        double worst = 0.0;
        for (int trial = 0; trial < 4; ++trial) {
            ModelParams params = init_params(cfg, rng);
            const LesionGraph g = testing::random_graph(rng, 3 + 3 * trial, 8);
            const GraphContext ctx = make_context(g);
            CompositeLoss loss{&ctx, &params, cfg, {}, Tensor::from_rows({{static_cast<double>(trial % 2)}})};
            Rng r0(99);
            Tape probe;
            loss.frozen = forward_on_tape(probe, ctx, params, cfg, Mode::train, r0).pruning.retained;
            worst = std::max(worst, testing::max_param_grad_error(params.parameters(), loss));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("logistic regression") {
    const std::vector<std::vector<double>> two{{-1.0}, {1.0}};
    const std::vector<int> y2{0, 1};
    const LogisticModel m = logistic_regression_fit(two, y2);
    CHECK(m.predict(two[0]) < 0.5);
    CHECK(m.predict(two[1]) > 0.5);

    const std::vector<int> one_class{1, 1};
    CHECK_THROWS_AS(logistic_regression_fit(two, one_class), DegenerateDataError);

    Rng rng(60);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
        x.push_back({nd(rng), nd(rng)});
        y.push_back(i < 10 ? 1 : 0);
    }
    LogisticConfig heavy;
    heavy.l2 = 1e6;
    heavy.epochs = 2000;
    const LogisticModel flat = logistic_regression_fit(x, y, heavy);
    for (double w : flat.weights) CHECK(std::abs(w) < 1e-6);
    CHECK(flat.predict(x[0]) == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("logistic regression is close to an LDA oracle on Gaussian blobs") {
    Rng rng(61);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (int i = 0; i < 100; ++i) {
            const int label = i % 2;
            const double shift = label ? 1.0 : 0.0;
            const double a = nd(rng), b = nd(rng);
            x.push_back({a + shift, 0.5 * a + b - 0.5 * shift});
            y.push_back(label);
        }
        // pooled-covariance LDA direction
        double mu[2][2] = {{0, 0}, {0, 0}};
        int cnt[2] = {0, 0};
        for (std::size_t i = 0; i < x.size(); ++i) {
            ++cnt[y[i]];
            for (int c = 0; c < 2; ++c) mu[y[i]][c] += x[i][c];
        }
        for (int k = 0; k < 2; ++k)
            for (int c = 0; c < 2; ++c) mu[k][c] /= cnt[k];
        double s[2][2] = {{0, 0}, {0, 0}};
        for (std::size_t i = 0; i < x.size(); ++i)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) s[a][b] += (x[i][a] - mu[y[i]][a]) * (x[i][b] - mu[y[i]][b]);
        const double det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        const double d0 = mu[1][0] - mu[0][0], d1 = mu[1][1] - mu[0][1];
        const double w0 = (s[1][1] * d0 - s[0][1] * d1) / det;
        const double w1 = (-s[1][0] * d0 + s[0][0] * d1) / det;
        std::vector<double> lda, lr;
        const LogisticModel m = logistic_regression_fit(x, y);
        for (const auto& row : x) {
            lda.push_back(w0 * row[0] + w1 * row[1]);
            lr.push_back(m.predict(row));
        }
        CHECK(std::abs(roc_auc(lda, y) - roc_auc(lr, y)) <= 0.02);
    }
}
