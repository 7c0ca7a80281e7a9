#include "lgnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lgnn/error.hpp"
#include "lgnn/metrics.hpp"

namespace lgnn {

void OptimConfig::validate() const {
    if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
    if (!(weight_decay >= 0.0)) throw ParameterError("weight decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ParameterError("Adam betas must lie in [0,1)");
    }
    if (!(eps > 0.0)) throw ParameterError("Adam epsilon must be positive");
}

void adamw_step(std::span<Parameter* const> params, OptimState& state, const OptimConfig& cfg) {
    cfg.validate();
    for (const Parameter* p : params) {
        if (!p->grad.same_shape(p->value)) throw ShapeError("gradient of " + p->name + " has wrong shape");
        if (!all_finite(p->grad)) throw NumericError("non-finite gradient for parameter " + p->name);
    }
    if (state.m.empty()) {
        for (const Parameter* p : params) {
            state.m.emplace_back(p->value.rows(), p->value.cols());
            state.v.emplace_back(p->value.rows(), p->value.cols());
        }
    }
    if (state.m.size() != params.size()) throw UsageError("optimizer state does not match parameter list");

    ++state.t;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            const double theta = p.value[i];
            p.value[i] = theta - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps) - cfg.lr * cfg.weight_decay * theta;
        }
    }
}

std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> labels, std::size_t batch_size,
                                                       Rng& rng) {
    if (batch_size < 2) throw ParameterError("balanced batches need batch_size >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw DegenerateDataError("balanced batches need both classes present");

    std::vector<std::size_t>& major = pos.size() >= neg.size() ? pos : neg;
    std::vector<std::size_t>& minor = pos.size() >= neg.size() ? neg : pos;
    const std::size_t take_major = (batch_size + 1) / 2;
    const std::size_t take_minor = batch_size / 2;
    const std::size_t n_batches = (major.size() + take_major - 1) / take_major;

    auto draw_cycles = [&rng](const std::vector<std::size_t>& pool, std::size_t count) {
        std::vector<std::size_t> out;
        out.reserve(count);
        std::vector<std::size_t> cycle = pool;
        while (out.size() < count) {
            std::shuffle(cycle.begin(), cycle.end(), rng);
            const std::size_t need = std::min(count - out.size(), cycle.size());
            out.insert(out.end(), cycle.begin(), cycle.begin() + static_cast<std::ptrdiff_t>(need));
        }
        return out;
    };
    const std::vector<std::size_t> major_draw = draw_cycles(major, n_batches * take_major);
    const std::vector<std::size_t> minor_draw = draw_cycles(minor, n_batches * take_minor);

    std::vector<std::vector<std::size_t>> batches(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        auto& batch = batches[b];
        batch.reserve(batch_size);
        for (std::size_t k = 0; k < take_major; ++k) batch.push_back(major_draw[b * take_major + k]);
        for (std::size_t k = 0; k < take_minor; ++k) batch.push_back(minor_draw[b * take_minor + k]);
    }
    return batches;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
    if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ParameterError("epochs must be >= 1");
    if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
    if (balanced_sampling && batch_size < 2) throw ParameterError("balanced sampling needs batch_size >= 2");
}

std::vector<double> predict(std::span<const LabeledGraph> graphs, const ModelParams& params,
                            const ModelConfig& cfg) {
    ModelParams local = params;
    Rng unused(0);
    std::vector<double> out;
    out.reserve(graphs.size());
    for (const LabeledGraph& g : graphs) {
        Tape tape;
        out.push_back(forward_on_tape(tape, *g.ctx, local, cfg, Mode::eval, unused).probability.value()[0]);
    }
    return out;
}

double evaluate_loss(std::span<const LabeledGraph> graphs, const ModelParams& params, const ModelConfig& cfg) {
    if (graphs.empty()) throw InputError("evaluate_loss on an empty graph list");
    const std::vector<double> probs = predict(graphs, params, cfg);
    double acc = 0.0;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        acc += bce_loss(Tensor(1, 1, probs[i]), Tensor(1, 1, static_cast<double>(graphs[i].label)));
    }
    return acc / static_cast<double>(graphs.size());
}

TrainResult train_fold(std::span<const LabeledGraph> train, std::span<const LabeledGraph> val,
                       const ModelConfig& model_cfg, const TrainConfig& train_cfg, const OptimConfig& optim_cfg) {
    model_cfg.validate();
    train_cfg.validate();
    optim_cfg.validate();
    if (train.empty()) throw InputError("train_fold needs training graphs");
    if (val.empty()) throw InputError("train_fold needs validation graphs");

    std::vector<int> train_labels;
    for (const LabeledGraph& g : train) train_labels.push_back(g.label);
    std::vector<int> val_labels;
    for (const LabeledGraph& g : val) val_labels.push_back(g.label);
    const bool val_has_both = std::count(val_labels.begin(), val_labels.end(), 1) > 0 &&
                              std::count(val_labels.begin(), val_labels.end(), 0) > 0;
    if (std::count(train_labels.begin(), train_labels.end(), 1) == 0 ||
        std::count(train_labels.begin(), train_labels.end(), 0) == 0) {
        throw DegenerateDataError("training split needs both classes");
    }

    Rng init_rng = make_rng(train_cfg.seed, "init");
    Rng batch_rng = make_rng(train_cfg.seed, "batches");
    Rng dropout_rng = make_rng(train_cfg.seed, "dropout");

    ModelParams params = init_params(model_cfg, init_rng);
    OptimState state;
    const std::vector<Parameter*> slots = params.parameters();

    TrainResult result;
    double best_metric = -std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        const auto batches = train_cfg.balanced_sampling
                                 ? balanced_batches(train_labels, train_cfg.batch_size, batch_rng)
                                 : shuffled_batches(train.size(), train_cfg.batch_size, batch_rng);
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (const auto& batch : batches) {
            params.zero_grad();
            const double weight = 1.0 / static_cast<double>(batch.size());
            for (const std::size_t idx : batch) {
                Tape tape;
                const TapeForward out =
                    forward_on_tape(tape, *train[idx].ctx, params, model_cfg, Mode::train, dropout_rng);
                const Var loss = bce_with_logits(out.logit, Tensor(1, 1, static_cast<double>(train[idx].label)));
                tape.backward(loss, weight);
                loss_sum += loss.value()[0];
                ++loss_count;
            }
            adamw_step(slots, state, optim_cfg);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(loss_count);
        double metric = 0.0;
        if (val_has_both) {
            rec.val_auc = roc_auc(predict(val, params, model_cfg), val_labels);
            metric = rec.val_auc;
        } else {
            rec.val_auc = std::numeric_limits<double>::quiet_NaN();
            metric = -evaluate_loss(val, params, model_cfg);
        }
        result.history.push_back(rec);
        if (metric > best_metric) {
            best_metric = metric;
            result.best_params = params;
            result.best_epoch = epoch;
            result.best_val_auc = rec.val_auc;
        }
    }
    return result;
}

TrainResult train_fold(std::span<const LesionGraph> train, std::span<const LesionGraph> val,
                       const ModelConfig& model_cfg, const TrainConfig& train_cfg, const OptimConfig& optim_cfg) {
    std::vector<GraphContext> contexts;
    contexts.reserve(train.size() + val.size());
    for (const LesionGraph& g : train) contexts.push_back(make_context(g));
    for (const LesionGraph& g : val) contexts.push_back(make_context(g));
    std::vector<LabeledGraph> tr, va;
    for (std::size_t i = 0; i < train.size(); ++i) tr.push_back({&contexts[i], train[i].label});
    for (std::size_t i = 0; i < val.size(); ++i) va.push_back({&contexts[train.size() + i], val[i].label});
    return train_fold(tr, va, model_cfg, train_cfg, optim_cfg);
}

}  // namespace lgnn
