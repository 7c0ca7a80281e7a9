#include "lgnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "lgnn/error.hpp"

namespace lgnn {

std::string_view to_string(Architecture a) noexcept {
    return a == Architecture::graph ? "graph" : "set_proc";
}

std::optional<Architecture> architecture_from_string(std::string_view name) noexcept {
    if (name == "graph") return Architecture::graph;
    if (name == "set_proc") return Architecture::set_proc;
    return std::nullopt;
}

void ModelConfig::validate() const {
    if (hidden_dims.empty()) throw ParameterError("model needs at least one enrichment layer");
    for (const std::size_t d : hidden_dims)
        if (d == 0) throw ParameterError("hidden dimensions must be positive");
    for (const std::size_t d : head_dims)
        if (d == 0) throw ParameterError("head dimensions must be positive");
    if (feature_dim == 0) throw ParameterError("feature_dim must be positive");
    if (!(r > 0.0 && r <= 1.0)) throw ParameterError("retention ratio r must lie in (0,1]");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("dropout must lie in [0,1)");
    graph_config().validate();
}

std::vector<std::size_t> hidden_dims_for_depth(std::size_t layers) {
    if (layers == 0) throw ParameterError("layer count must be >= 1");
    std::vector<std::size_t> dims(layers - 1, 64);
    dims.push_back(8);
    return dims;
}

std::string to_json(const ModelConfig& cfg) {
    const nlohmann::json j = {
        {"architecture", std::string(to_string(cfg.architecture))},
        {"layer_kind", std::string(to_string(cfg.layer_kind))},
        {"hidden_dims", cfg.hidden_dims},
        {"head_dims", cfg.head_dims},
        {"r", cfg.r},
        {"k", cfg.k},
        {"tau", cfg.tau},
        {"distance_floor", cfg.distance_floor},
        {"dropout", cfg.dropout},
        {"use_spm", cfg.use_spm},
        {"feature_dim", cfg.feature_dim},
    };
    return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model config: ") + e.what());
    }
    try {
        ModelConfig cfg;
        const auto arch = architecture_from_string(j.at("architecture").get<std::string>());
        const auto kind = layer_kind_from_string(j.at("layer_kind").get<std::string>());
        if (!arch || !kind) throw SchemaError("model config: unknown architecture or layer kind");
        cfg.architecture = *arch;
        cfg.layer_kind = *kind;
        cfg.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
        cfg.head_dims = j.at("head_dims").get<std::vector<std::size_t>>();
        cfg.r = j.at("r").get<double>();
        cfg.k = j.at("k").get<std::size_t>();
        cfg.tau = j.at("tau").get<double>();
        cfg.distance_floor = j.at("distance_floor").get<double>();
        cfg.dropout = j.at("dropout").get<double>();
        cfg.use_spm = j.at("use_spm").get<bool>();
        cfg.feature_dim = j.at("feature_dim").get<std::size_t>();
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("model config: ") + e.what());
    }
}

std::vector<Parameter*> ModelParams::parameters() {
    std::vector<Parameter*> out;
    for (LayerParams& l : layers)
        for (Parameter* p : l.parameters()) out.push_back(p);
    if (projection.defined()) out.push_back(&projection);
    for (Linear& h : head) {
        out.push_back(&h.weight);
        out.push_back(&h.bias);
    }
    return out;
}

std::vector<const Parameter*> ModelParams::parameters() const {
    auto mut = const_cast<ModelParams*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

void ModelParams::zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
}

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor t(fan_in, fan_out);
    for (double& v : t.data()) v = u(rng);
    return t;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelParams params;
    std::size_t d_in = cfg.feature_dim;
    for (std::size_t l = 0; l < cfg.hidden_dims.size(); ++l) {
        // Set-Proc layers are plain dense maps, which share the GCN parameter layout.
        const LayerKind kind = cfg.architecture == Architecture::set_proc ? LayerKind::gcn : cfg.layer_kind;
        params.layers.push_back(init_layer(kind, d_in, cfg.hidden_dims[l], "layer" + std::to_string(l), rng));
        d_in = cfg.hidden_dims[l];
    }
    std::normal_distribution<double> gauss(0.0, 0.1);
    Tensor p(d_in, 1);
    for (double& v : p.data()) v = gauss(rng);
    params.projection = Parameter("spm.projection", std::move(p));

    std::vector<std::size_t> dims = cfg.head_dims;
    dims.push_back(1);
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const std::string pre = "head" + std::to_string(l);
        params.head.push_back(Linear{Parameter(pre + ".weight", glorot(d_in, dims[l], rng)),
                                     Parameter(pre + ".bias", Tensor(1, dims[l]))});
        d_in = dims[l];
    }
    return params;
}

TapeForward forward_on_tape(Tape& tape, const GraphContext& ctx, ModelParams& params, const ModelConfig& cfg,
                            Mode mode, Rng& rng, const ForwardOptions& opts) {
    if (ctx.num_nodes == 0) throw InputError("forward on a graph without lesions");
    if (ctx.features.cols() != cfg.feature_dim) {
        throw ShapeError("graph features have dimension " + std::to_string(ctx.features.cols()) +
                         ", model expects " + std::to_string(cfg.feature_dim));
    }
    const bool training = mode == Mode::train;

    Var h = tape.constant(ctx.features);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        LayerParams& layer = params.layers[l];
        if (cfg.architecture == Architecture::set_proc) {
            if (h.cols() != layer.d_in) throw ShapeError("set-proc layer input mismatch");
            h = add_row(matmul(h, tape.parameter(layer.weight)), tape.parameter(layer.bias));
        } else {
            h = layer_forward(tape, h, ctx, layer);
        }
        if (l + 1 < params.layers.size()) h = dropout(relu(h), cfg.dropout, training, rng);
    }

    PruneResult pruning;
    Var pooled_rows = h;
    if (cfg.use_spm) {
        PruneOutput spm = self_prune(h, tape.parameter(params.projection), cfg.r, opts.gate, opts.frozen_selection);
        pooled_rows = spm.gated;
        pruning = std::move(spm.result);
    } else {
        pruning.retained.resize(ctx.num_nodes);
        for (std::size_t i = 0; i < ctx.num_nodes; ++i) pruning.retained[i] = i;
        pruning.gated_features = h.value();
    }

    Var z = sum_rows(pooled_rows);
    for (std::size_t l = 0; l < params.head.size(); ++l) {
        z = add_row(matmul(z, tape.parameter(params.head[l].weight)), tape.parameter(params.head[l].bias));
        if (l + 1 < params.head.size()) {
            z = relu(z);
            if (l == 0) z = dropout(z, cfg.dropout, training, rng);
        }
    }
    return {z, sigmoid(z), std::move(pruning)};
}

ForwardResult forward(const GraphContext& ctx, const ModelParams& params, const ModelConfig& cfg, Mode mode,
                      Rng& rng, const ForwardOptions& opts) {
    ModelParams local = params;
    Tape tape;
    TapeForward out = forward_on_tape(tape, ctx, local, cfg, mode, rng, opts);
    const double prob = std::clamp(out.probability.value()[0], kBceClamp, 1.0 - kBceClamp);
    return {prob, out.logit.value()[0], std::move(out.pruning)};
}

ForwardResult forward(const LesionGraph& graph, const ModelParams& params, const ModelConfig& cfg, Mode mode,
                      Rng& rng, const ForwardOptions& opts) {
    return forward(make_context(graph), params, cfg, mode, rng, opts);
}

ForwardResult set_proc_forward(const LesionGraph& graph, const ModelParams& params, const ModelConfig& cfg,
                               Mode mode, Rng& rng) {
    ModelConfig sp = cfg;
    sp.architecture = Architecture::set_proc;
    return forward(make_context(graph), params, sp, mode, rng);
}

std::vector<double> mean_feature_vector(const LesionGraph& graph) {
    if (graph.lesions.empty()) throw InputError("mean_feature_vector on an empty graph");
    const std::size_t d = graph.feature_dim();
    std::vector<double> mean(d, 0.0);
    for (const Lesion& l : graph.lesions) {
        if (l.features.size() != d) throw ShapeError("inconsistent lesion feature dimension");
        for (std::size_t j = 0; j < d; ++j) mean[j] += l.features[j];
    }
    for (double& v : mean) v /= static_cast<double>(graph.lesions.size());
    return mean;
}

double LogisticModel::predict(std::span<const double> x) const {
    if (x.size() != weights.size()) throw ShapeError("logistic model input dimension mismatch");
    double z = bias;
    for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * x[j];
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

LogisticModel logistic_regression_fit(const std::vector<std::vector<double>>& x, std::span<const int> y,
                                      const LogisticConfig& cfg) {
    if (x.size() != y.size() || x.empty()) throw InputError("logistic regression needs matching non-empty x and y");
    if (cfg.l2 < 0.0 || cfg.lr <= 0.0) throw ParameterError("logistic regression needs l2 >= 0 and lr > 0");
    std::size_t positives = 0;
    for (const int label : y) positives += label == 1 ? 1 : 0;
    if (positives == 0 || positives == y.size()) {
        throw DegenerateDataError("logistic regression needs both classes in the training set");
    }
    const std::size_t d = x.front().size();
    for (const auto& row : x)
        if (row.size() != d) throw ShapeError("logistic regression rows have inconsistent dimension");

    LogisticModel model{std::vector<double>(d, 0.0), 0.0};
    const double inv_n = 1.0 / static_cast<double>(x.size());
    std::vector<double> grad(d);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double err = model.predict(x[i]) - static_cast<double>(y[i]);
            for (std::size_t j = 0; j < d; ++j) grad[j] += err * x[i][j];
            grad_b += err;
        }
        const double shrink = 1.0 / (1.0 + cfg.lr * cfg.l2);
        for (std::size_t j = 0; j < d; ++j) model.weights[j] = (model.weights[j] - cfg.lr * grad[j] * inv_n) * shrink;
        model.bias -= cfg.lr * grad_b * inv_n;
    }
    return model;
}

}  // namespace lgnn
