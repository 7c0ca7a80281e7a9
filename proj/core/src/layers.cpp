#include "lgnn/layers.hpp"

#include <cmath>
#include <string>

#include "lgnn/error.hpp"

namespace lgnn {

std::string_view to_string(LayerKind kind) noexcept {
    switch (kind) {
        case LayerKind::gcn: return "gcn";
        case LayerKind::sage: return "sage";
        case LayerKind::edge: return "edge";
        case LayerKind::gat: return "gat";
    }
    return "unknown";
}

std::optional<LayerKind> layer_kind_from_string(std::string_view name) noexcept {
    for (const LayerKind k : {LayerKind::gcn, LayerKind::sage, LayerKind::edge, LayerKind::gat})
        if (to_string(k) == name) return k;
    return std::nullopt;
}

GraphContext make_context(const LesionGraph& graph) {
    GraphContext ctx;
    const std::size_t n = graph.num_nodes();
    ctx.num_nodes = n;
    ctx.features = graph.features();
    ctx.adj_norm = normalized_adjacency(graph);

    std::vector<std::size_t> degree(n, 0);
    for (const Edge& e : graph.edges) {
        ++degree[e.i];
        ++degree[e.j];
    }
    ctx.neighbor_mean = Tensor(n, n);
    for (const Edge& e : graph.edges) {
        ctx.neighbor_mean(e.i, e.j) = e.weight / static_cast<double>(degree[e.i]);
        ctx.neighbor_mean(e.j, e.i) = e.weight / static_cast<double>(degree[e.j]);
    }
    flush_negligible(ctx.neighbor_mean);

    for (const Edge& e : graph.edges) {
        ctx.pair_dst.push_back(e.i);
        ctx.pair_src.push_back(e.j);
        ctx.pair_dst.push_back(e.j);
        ctx.pair_src.push_back(e.i);
    }
    ctx.attn_dst = ctx.pair_dst;
    ctx.attn_src = ctx.pair_src;
    for (std::size_t i = 0; i < n; ++i) {
        ctx.attn_dst.push_back(i);
        ctx.attn_src.push_back(i);
    }
    return ctx;
}

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor t(fan_in, fan_out);
    for (double& v : t.data()) v = u(rng);
    return t;
}

void require_cols(Var h, std::size_t d_in, std::string_view layer) {
    if (h.cols() != d_in) {
        throw ShapeError(std::string(layer) + " layer expects " + std::to_string(d_in) +
                         " input features, got " + h.value().shape_string());
    }
}

void require_nodes(Var h, const GraphContext& ctx) {
    if (h.rows() != ctx.num_nodes) {
        throw ShapeError("feature rows " + std::to_string(h.rows()) + " do not match graph with " +
                         std::to_string(ctx.num_nodes) + " nodes");
    }
}

}  // namespace

void LayerParams::validate() const {
    auto check = [&](const Parameter& p, std::size_t r, std::size_t c) {
        if (p.value.rows() != r || p.value.cols() != c) {
            throw ShapeError("parameter " + p.name + " has shape " + p.value.shape_string() + ", expected (" +
                             std::to_string(r) + "x" + std::to_string(c) + ")");
        }
    };
    switch (kind) {
        case LayerKind::gcn: check(weight, d_in, d_out); break;
        case LayerKind::sage:
            check(weight, d_in, d_out);
            check(weight_neigh, d_in, d_out);
            break;
        case LayerKind::edge: check(weight, 2 * d_in, d_out); break;
        case LayerKind::gat:
            check(weight, d_in, d_out);
            check(attention, 2 * d_out, 1);
            break;
    }
    check(bias, 1, d_out);
}

std::vector<Parameter*> LayerParams::parameters() {
    std::vector<Parameter*> out;
    for (Parameter* p : {&weight, &weight_neigh, &attention, &bias})
        if (p->defined()) out.push_back(p);
    return out;
}

LayerParams init_layer(LayerKind kind, std::size_t d_in, std::size_t d_out, std::string_view prefix,
                       Rng& rng) {
    if (d_in == 0 || d_out == 0) throw ParameterError("layer dimensions must be positive");
    LayerParams p;
    p.kind = kind;
    p.d_in = d_in;
    p.d_out = d_out;
    const std::string pre(prefix);
    switch (kind) {
        case LayerKind::gcn: p.weight = Parameter(pre + ".weight", glorot(d_in, d_out, rng)); break;
        case LayerKind::sage:
            p.weight = Parameter(pre + ".weight", glorot(d_in, d_out, rng));
            p.weight_neigh = Parameter(pre + ".weight_neigh", glorot(d_in, d_out, rng));
            break;
        case LayerKind::edge: p.weight = Parameter(pre + ".weight", glorot(2 * d_in, d_out, rng)); break;
        case LayerKind::gat:
            p.weight = Parameter(pre + ".weight", glorot(d_in, d_out, rng));
            p.attention = Parameter(pre + ".attention", glorot(2 * d_out, 1, rng));
            break;
    }
    p.bias = Parameter(pre + ".bias", Tensor(1, d_out));
    return p;
}

Var gcn_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params) {
    require_nodes(h, ctx);
    require_cols(h, params.d_in, "gcn");
    const Var adj = tape.constant(ctx.adj_norm);
    const Var hw = matmul(h, tape.parameter(params.weight));
    return add_row(matmul(adj, hw), tape.parameter(params.bias));
}

Var sage_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params) {
    require_nodes(h, ctx);
    require_cols(h, params.d_in, "sage");
    const Var self = matmul(h, tape.parameter(params.weight));
    const Var neigh_mean = matmul(tape.constant(ctx.neighbor_mean), h);
    const Var neigh = matmul(neigh_mean, tape.parameter(params.weight_neigh));
    return add_row(add(self, neigh), tape.parameter(params.bias));
}

Var edge_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params) {
    require_nodes(h, ctx);
    require_cols(h, params.d_in, "edge");
    const Var hi = gather_rows(h, ctx.pair_dst);
    const Var hj = gather_rows(h, ctx.pair_src);
    const Var msg_in = concat_cols(hi, sub(hj, hi));
    const Var msg = relu(add_row(matmul(msg_in, tape.parameter(params.weight)), tape.parameter(params.bias)));
    return scatter_add_rows(msg, ctx.pair_dst, ctx.num_nodes);
}

Var gat_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params) {
    require_nodes(h, ctx);
    require_cols(h, params.d_in, "gat");
    const Var wh = matmul(h, tape.parameter(params.weight));
    const Var act = leaky_relu(wh, kGatNegativeSlope);
    const Var pair = concat_cols(gather_rows(act, ctx.attn_dst), gather_rows(act, ctx.attn_src));
    const Var logits = matmul(pair, tape.parameter(params.attention));
    const Var alpha = segment_softmax(logits, ctx.attn_dst, ctx.num_nodes);
    const Var msg = scale_rows(gather_rows(wh, ctx.attn_src), alpha);
    return add_row(scatter_add_rows(msg, ctx.attn_dst, ctx.num_nodes), tape.parameter(params.bias));
}

Tensor gat_attention(const GraphContext& ctx, const LayerParams& params, const Tensor& h) {
    Tape tape;
    LayerParams copy = params;
    const Var wh = matmul(tape.constant(h), tape.parameter(copy.weight));
    const Var act = leaky_relu(wh, kGatNegativeSlope);
    const Var pair = concat_cols(gather_rows(act, ctx.attn_dst), gather_rows(act, ctx.attn_src));
    const Var logits = matmul(pair, tape.parameter(copy.attention));
    return segment_softmax(logits, ctx.attn_dst, ctx.num_nodes).value();
}

Var layer_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params) {
    switch (params.kind) {
        case LayerKind::gcn: return gcn_forward(tape, h, ctx, params);
        case LayerKind::sage: return sage_forward(tape, h, ctx, params);
        case LayerKind::edge: return edge_forward(tape, h, ctx, params);
        case LayerKind::gat: return gat_forward(tape, h, ctx, params);
    }
    throw ParameterError("unknown layer kind");
}

}  // namespace lgnn
