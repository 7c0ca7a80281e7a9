#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "lgnn/autodiff.hpp"
#include "lgnn/graph.hpp"

namespace lgnn {

enum class LayerKind { gcn, sage, edge, gat };

std::string_view to_string(LayerKind kind) noexcept;
std::optional<LayerKind> layer_kind_from_string(std::string_view name) noexcept;

inline constexpr double kGatNegativeSlope = 0.2;

/// Per-graph structures shared by every layer kind, computed once per graph.
struct GraphContext {
    std::size_t num_nodes = 0;
    Tensor features;
    Tensor adj_norm;       // GCN propagation matrix
    Tensor neighbor_mean;  // row i: w_ij / |N(i)| for j in N(i)
    // Directed neighbor pairs (both orientations of every stored edge).
    std::vector<std::size_t> pair_dst;  // receiving node i
    std::vector<std::size_t> pair_src;  // neighbor j
    // Same pairs plus one self pair per node, for attention.
    std::vector<std::size_t> attn_dst;
    std::vector<std::size_t> attn_src;
};

GraphContext make_context(const LesionGraph& graph);

/// Learnable arrays of one message-passing layer. Unused slots stay empty:
///   gcn:  weight (d_in x d_out), bias
///   sage: weight (self), weight_neigh, bias
///   edge: weight (2 d_in x d_out) of the message MLP, bias
///   gat:  weight (d_in x d_out), attention (2 d_out x 1), bias
struct LayerParams {
    LayerKind kind = LayerKind::gcn;
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    Parameter weight;
    Parameter weight_neigh;
    Parameter attention;
    Parameter bias;

    void validate() const;
    std::vector<Parameter*> parameters();
};

/// Glorot-uniform weights, zero bias.
LayerParams init_layer(LayerKind kind, std::size_t d_in, std::size_t d_out, std::string_view prefix,
                       Rng& rng);

// All layer functions return pre-activation outputs (n x d_out).

/// Â H W + b.
Var gcn_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params);
/// H W_self + (mean_j w_ij h_j) W_neigh + b.
Var sage_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params);
/// sum_j ReLU([h_i, h_j - h_i] Θ + b); zero row for a node without neighbors.
Var edge_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params);
/// sum_j α_ij W h_j + b over j in N(i) ∪ {i}; stored edge weights are ignored.
Var gat_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params);

/// Attention coefficients α (one per attention pair, in `ctx.attn_*` order).
Tensor gat_attention(const GraphContext& ctx, const LayerParams& params, const Tensor& h);

Var layer_forward(Tape& tape, Var h, const GraphContext& ctx, LayerParams& params);

}  // namespace lgnn
