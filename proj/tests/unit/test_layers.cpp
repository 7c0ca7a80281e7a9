#include "doctest.h"

#include <cmath>
#include <string>

#include "lgnn/error.hpp"
#include "lgnn/layers.hpp"
#include "support.hpp"

using namespace lgnn;

namespace {

constexpr LayerKind kKinds[] = {LayerKind::gcn, LayerKind::sage, LayerKind::edge, LayerKind::gat};

Tensor run_layer(const GraphContext& ctx, LayerParams& params, const Tensor& h) {
    Tape tape;
    return layer_forward(tape, tape.constant(h), ctx, params).value();
}

std::vector<std::vector<std::pair<std::size_t, double>>> neighbors(const LesionGraph& g) {
    std::vector<std::vector<std::pair<std::size_t, double>>> nb(g.num_nodes());
    for (const Edge& e : g.edges) {
        nb[e.i].emplace_back(e.j, e.weight);
        nb[e.j].emplace_back(e.i, e.weight);
    }
    return nb;
}

std::vector<double> row_times(const Tensor& w, const std::vector<double>& x) {
    std::vector<double> out(w.cols(), 0.0);
    for (std::size_t p = 0; p < w.rows(); ++p)
        for (std::size_t j = 0; j < w.cols(); ++j) out[j] += x[p] * w(p, j);
    return out;
}

std::vector<double> row_of(const Tensor& t, std::size_t r) { return {t.row(r).begin(), t.row(r).end()}; }

double leaky(double x) { return x > 0 ? x : kGatNegativeSlope * x; }

Tensor oracle(const LesionGraph& g, const LayerParams& p, const Tensor& h) {
    const std::size_t n = g.num_nodes();
    const auto nb = neighbors(g);
    Tensor out(n, p.d_out);
    switch (p.kind) {
        case LayerKind::gcn: {
            std::vector<double> deg(n, 1.0);
            for (std::size_t i = 0; i < n; ++i)
                for (auto [j, w] : nb[i]) deg[i] += w;
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> agg(h.cols(), 0.0);
                auto add = [&](std::size_t j, double a) {
                    for (std::size_t c = 0; c < h.cols(); ++c) agg[c] += a * h(j, c);
                };
                add(i, 1.0 / deg[i]);
                for (auto [j, w] : nb[i]) add(j, w / std::sqrt(deg[i] * deg[j]));
                const auto o = row_times(p.weight.value, agg);
                for (std::size_t c = 0; c < p.d_out; ++c) out(i, c) = o[c] + p.bias.value[c];
            }
            break;
        }
        case LayerKind::sage:
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> mean(h.cols(), 0.0);
                for (auto [j, w] : nb[i])
                    for (std::size_t c = 0; c < h.cols(); ++c) mean[c] += w * h(j, c) / static_cast<double>(nb[i].size());
                const auto s = row_times(p.weight.value, row_of(h, i));
                const auto m = row_times(p.weight_neigh.value, mean);
                for (std::size_t c = 0; c < p.d_out; ++c) out(i, c) = s[c] + m[c] + p.bias.value[c];
            }
            break;
        case LayerKind::edge:
            for (std::size_t i = 0; i < n; ++i)
                for (auto [j, w] : nb[i]) {
                    std::vector<double> in = row_of(h, i);
                    for (std::size_t c = 0; c < h.cols(); ++c) in.push_back(h(j, c) - h(i, c));
                    const auto m = row_times(p.weight.value, in);
                    for (std::size_t c = 0; c < p.d_out; ++c) out(i, c) += std::max(0.0, m[c] + p.bias.value[c]);
                }
            break;
        case LayerKind::gat: {
            const Tensor wh = matmul(h, p.weight.value);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<std::size_t> members{i};
                for (auto [j, w] : nb[i]) members.push_back(j);
                std::vector<double> e;
                for (std::size_t j : members) {
                    double s = 0.0;
                    for (std::size_t c = 0; c < p.d_out; ++c)
                        s += p.attention.value[c] * leaky(wh(i, c)) + p.attention.value[p.d_out + c] * leaky(wh(j, c));
                    e.push_back(s);
                }
                const double mx = *std::max_element(e.begin(), e.end());
                double z = 0.0;
                for (double& v : e) z += (v = std::exp(v - mx));
                for (std::size_t m = 0; m < members.size(); ++m)
                    for (std::size_t c = 0; c < p.d_out; ++c) out(i, c) += e[m] / z * wh(members[m], c);
                for (std::size_t c = 0; c < p.d_out; ++c) out(i, c) += p.bias.value[c];
            }
            break;
        }
    }
    return out;
}

void randomize_bias(LayerParams& p, Rng& rng) { p.bias.value = testing::random_tensor(rng, 1, p.d_out, 0.3); }

}  // namespace

TEST_CASE("layers match per-node oracles on random graphs") {
    Rng rng(21);
    for (LayerKind kind : kKinds) {
        CAPTURE(std::string(to_string(kind)));
        for (int trial = 0; trial < 10; ++trial) {
            const LesionGraph g = testing::random_graph(rng, 5 + trial % 6, 4, 3, 0.5);
            const GraphContext ctx = make_context(g);
            LayerParams p = init_layer(kind, 4, 3, "l", rng);
            randomize_bias(p, rng);
            const Tensor h = testing::random_tensor(rng, g.num_nodes(), 4);
            CHECK(max_abs_diff(run_layer(ctx, p, h), oracle(g, p, h)) < 1e-12);
        }
    }
}

TEST_CASE("isolated node cases") {
    Rng rng(22);
    const LesionGraph g = build_graph("one", testing::random_lesions(rng, 1, 3), 0, GraphConfig{});
    const GraphContext ctx = make_context(g);
    const Tensor h = ctx.features;

    LayerParams gcn = init_layer(LayerKind::gcn, 3, 3, "g", rng);
    gcn.weight.value = Tensor::identity(3);
    CHECK(run_layer(ctx, gcn, h) == h);

    LayerParams sage = init_layer(LayerKind::sage, 3, 3, "s", rng);
    sage.weight.value = Tensor::identity(3);
    CHECK(run_layer(ctx, sage, h) == h);

    LayerParams edge = init_layer(LayerKind::edge, 3, 2, "e", rng);
    CHECK(run_layer(ctx, edge, h) == Tensor(1, 2, 0.0));

    LayerParams gat = init_layer(LayerKind::gat, 3, 2, "a", rng);
    CHECK(gat_attention(ctx, gat, h) == Tensor::from_rows({{1.0}}));
    CHECK(max_abs_diff(run_layer(ctx, gat, h), matmul(h, gat.weight.value)) < 1e-15);
}

TEST_CASE("two identical nodes give identical gcn rows") {
    LesionGraph g;
    g.lesions.resize(2);
    g.lesions[0].features = g.lesions[1].features = {0.3, -1.2};
    g.edges = {{0, 1, 1.0}};
    Rng rng(23);
    LayerParams p = init_layer(LayerKind::gcn, 2, 4, "g", rng);
    const Tensor out = run_layer(make_context(g), p, g.features());
    for (std::size_t c = 0; c < 4; ++c) CHECK(out(0, c) == out(1, c));
}

TEST_CASE("sage single neighbor of weight one") {
    LesionGraph g;
    g.lesions.resize(2);
    g.lesions[0].features = {1.0, 2.0};
    g.lesions[1].features = {-0.5, 4.0};
    g.edges = {{0, 1, 1.0}};
    Rng rng(24);
    LayerParams p = init_layer(LayerKind::sage, 2, 3, "s", rng);
    p.weight.value = Tensor(2, 3, 0.0);
    const Tensor out = run_layer(make_context(g), p, g.features());
    const Tensor want = matmul(Tensor::from_rows({{-0.5, 4.0}}), p.weight_neigh.value);
    for (std::size_t c = 0; c < 3; ++c) CHECK(out(0, c) == want(0, c));
}

TEST_CASE("edgeconv with equal neighbor features uses a zero difference") {
    LesionGraph g;
    g.lesions.resize(2);
    g.lesions[0].features = g.lesions[1].features = {0.7, -0.1};
    g.edges = {{0, 1, 0.4}};
    Rng rng(25);
    LayerParams p = init_layer(LayerKind::edge, 2, 3, "e", rng);
    const Tensor out = run_layer(make_context(g), p, g.features());
    Tensor in = Tensor::from_rows({{0.7, -0.1, 0.0, 0.0}});
    const Tensor want = relu(matmul(in, p.weight.value));
    for (std::size_t c = 0; c < 3; ++c) CHECK(out(0, c) == want(0, c));
}

TEST_CASE("gat with two identical neighbors attends one third each") {
    LesionGraph g;
    g.lesions.resize(3);
    for (auto& l : g.lesions) l.features = {0.2, 0.9};
    g.edges = {{0, 1, 0.3}, {0, 2, 0.8}};
    Rng rng(26);
    LayerParams p = init_layer(LayerKind::gat, 2, 2, "a", rng);
    const GraphContext ctx = make_context(g);
    const Tensor alpha = gat_attention(ctx, p, g.features());
    for (std::size_t k = 0; k < ctx.attn_dst.size(); ++k)
        if (ctx.attn_dst[k] == 0) CHECK(alpha[k] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("gat attention rows sum to one") {
    Rng rng(27);
    for (int trial = 0; trial < 20; ++trial) {
        const LesionGraph g = testing::random_graph(rng, 12, 4);
        const GraphContext ctx = make_context(g);
        LayerParams p = init_layer(LayerKind::gat, 4, 5, "a", rng);
        const Tensor alpha = gat_attention(ctx, p, ctx.features);
        std::vector<double> rows(g.num_nodes(), 0.0);
        for (std::size_t k = 0; k < ctx.attn_dst.size(); ++k) rows[ctx.attn_dst[k]] += alpha[k];
        for (double s : rows) CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("gat ignores edge weights while gcn does not") {
    Rng rng(28);
    const LesionGraph g = testing::random_graph(rng, 8, 4);
    LesionGraph doubled = g;
    for (Edge& e : doubled.edges) e.weight *= 2.0;
    LayerParams gat = init_layer(LayerKind::gat, 4, 3, "a", rng);
    CHECK(run_layer(make_context(g), gat, g.features()) == run_layer(make_context(doubled), gat, g.features()));
    LayerParams gcn = init_layer(LayerKind::gcn, 4, 3, "g", rng);
    CHECK(max_abs_diff(run_layer(make_context(g), gcn, g.features()),
                       run_layer(make_context(doubled), gcn, g.features())) > 1e-6);
}

TEST_CASE("layers are permutation equivariant") {
    Rng rng(29);
    GraphConfig cfg;
    cfg.tau = 0.5;
    for (LayerKind kind : kKinds) {
        CAPTURE(std::string(to_string(kind)));
        for (int trial = 0; trial < 10; ++trial) {
            const LesionGraph g = testing::random_graph(rng, 10, 4, cfg.k, cfg.tau);
            const auto perm = testing::random_permutation(rng, g.num_nodes());
            const LesionGraph pg = testing::permuted_graph(g, perm, cfg);
            LayerParams p = init_layer(kind, 4, 3, "l", rng);
            const Tensor out = run_layer(make_context(g), p, g.features());
            const Tensor pout = run_layer(make_context(pg), p, pg.features());
            for (std::size_t a = 0; a < perm.size(); ++a)
                for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(pout(a, c) - out(perm[a], c)) < 1e-9);
        }
    }
}

TEST_CASE("layer gradients match central differences") {
    Rng rng(30);
    for (LayerKind kind : kKinds) {
        CAPTURE(std::string(to_string(kind)));
        double worst_x = 0.0, worst_p = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            const LesionGraph g = testing::random_graph(rng, 3 + trial, 4);
            const GraphContext ctx = make_context(g);
            LayerParams p = init_layer(kind, 4, 3, "l", rng);
            randomize_bias(p, rng);
            auto fx = [&](Tape& t, Var h) { return sum(layer_forward(t, h, ctx, p)); };
            worst_x = std::max(worst_x, check_gradients(fx, ctx.features).max_relative_error);
            auto fp = [&](Tape& t) { return sum(layer_forward(t, t.constant(ctx.features), ctx, p)); };
            worst_p = std::max(worst_p, testing::max_param_grad_error(p.parameters(), fp));
        }
        CHECK(worst_x < 1e-4);
        CHECK(worst_p < 1e-4);
    }
}

TEST_CASE("layer shape errors") {
    Rng rng(31);
    const LesionGraph g = testing::random_graph(rng, 5, 4);
    const GraphContext ctx = make_context(g);
    for (LayerKind kind : kKinds) {
        LayerParams p = init_layer(kind, 3, 2, "l", rng);
        Tape tape;
        CHECK_THROWS_AS(layer_forward(tape, tape.constant(ctx.features), ctx, p), ShapeError);
    }
    CHECK(layer_kind_from_string("sage") == LayerKind::sage);
    CHECK_FALSE(layer_kind_from_string("mlp").has_value());
}
