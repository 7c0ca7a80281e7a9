#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgnn/autodiff.hpp"
#include "lgnn/graph.hpp"
#include "lgnn/layers.hpp"
#include "lgnn/pruning.hpp"

namespace lgnn {

enum class Architecture {
    graph,     // message-passing layers over the lesion graph
    set_proc,  // per-lesion feed-forward, edges unused
};

std::string_view to_string(Architecture a) noexcept;
std::optional<Architecture> architecture_from_string(std::string_view name) noexcept;

struct ModelConfig {
    Architecture architecture = Architecture::graph;
    LayerKind layer_kind = LayerKind::gcn;
    std::vector<std::size_t> hidden_dims{64, 8};
    /// Hidden widths of the classification head; a final 1-unit layer follows.
    std::vector<std::size_t> head_dims{8};
    double r = 0.5;
    std::size_t k = 5;
    double tau = 0.01;
    double distance_floor = 0.0;
    double dropout = 0.5;
    bool use_spm = true;
    std::size_t feature_dim = 16;

    void validate() const;
    GraphConfig graph_config() const { return {k, tau, distance_floor}; }
    std::size_t embedding_dim() const { return hidden_dims.back(); }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Hidden widths for a stack of `layers` message-passing layers: 64 for every
/// layer but the last, which is 8 wide to match the projection vector.
std::vector<std::size_t> hidden_dims_for_depth(std::size_t layers);

std::string to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text);

struct Linear {
    Parameter weight;
    Parameter bias;
};

struct ModelParams {
    std::vector<LayerParams> layers;
    Parameter projection;  // embedding_dim x 1
    std::vector<Linear> head;

    /// Every defined parameter in a fixed order (layers, projection, head).
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    void zero_grad();
};

/// Glorot-uniform weights, zero biases, projection p ~ N(0, 0.1²).
ModelParams init_params(const ModelConfig& cfg, Rng& rng);

enum class Mode { train, eval };

struct ForwardOptions {
    GateMode gate = GateMode::score;
    /// Replaces the top-r selection when non-null.
    const std::vector<std::size_t>* frozen_selection = nullptr;
};

struct TapeForward {
    Var logit;
    Var probability;
    PruneResult pruning;
};

/// enrich → (SPM) → sum readout → head → sigmoid, recorded on `tape` with
/// `params` bound as gradient sinks.
TapeForward forward_on_tape(Tape& tape, const GraphContext& ctx, ModelParams& params, const ModelConfig& cfg,
                            Mode mode, Rng& rng, const ForwardOptions& opts = {});

struct ForwardResult {
    double probability = 0.5;  // clamped to [kBceClamp, 1 - kBceClamp]
    double logit = 0.0;
    PruneResult pruning;
};

ForwardResult forward(const GraphContext& ctx, const ModelParams& params, const ModelConfig& cfg, Mode mode,
                      Rng& rng, const ForwardOptions& opts = {});
ForwardResult forward(const LesionGraph& graph, const ModelParams& params, const ModelConfig& cfg, Mode mode,
                      Rng& rng, const ForwardOptions& opts = {});
/// Set-Proc baseline: same pipeline with a per-lesion feed-forward in place of
/// message passing. `cfg.architecture` is ignored.
ForwardResult set_proc_forward(const LesionGraph& graph, const ModelParams& params, const ModelConfig& cfg,
                               Mode mode, Rng& rng);

// Logistic-regression baseline on mean-aggregated lesion features.

std::vector<double> mean_feature_vector(const LesionGraph& graph);

struct LogisticConfig {
    double l2 = 1e-3;
    std::size_t epochs = 500;
    double lr = 0.1;
};

struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;

    double predict(std::span<const double> x) const;
};

/// Full-batch gradient descent on L2-regularised BCE (bias unregularised).
/// The L2 term is applied as a proximal shrink so any l2 >= 0 is stable.
LogisticModel logistic_regression_fit(const std::vector<std::vector<double>>& x, std::span<const int> y,
                                      const LogisticConfig& cfg = {});

}  // namespace lgnn
