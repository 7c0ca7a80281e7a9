#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lgnn/network.hpp"

namespace lgnn {

struct OptimConfig {
    double lr = 1e-4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct OptimState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t t = 0;
};

/// One AdamW update with bias-corrected moments and decoupled decay:
///   θ ← θ − lr·m̂/(√v̂ + ε) − lr·wd·θ
/// Reads each parameter's `grad`; throws NumericError naming the parameter on
/// a non-finite gradient (before touching any parameter).
void adamw_step(std::span<Parameter* const> params, OptimState& state, const OptimConfig& cfg);

/// One epoch of class-balanced batches. Every majority index appears at
/// least once; the minority class is drawn from reshuffled cycles, so it
/// repeats when it is smaller. Each batch holds ⌈b/2⌉ majority and ⌊b/2⌋
/// minority samples; the last batch is topped up with re-drawn majority
/// samples so that all batches are full.
std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> labels, std::size_t batch_size,
                                                       Rng& rng);

/// Plain shuffled batches (used when balanced sampling is off).
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, Rng& rng);

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    bool balanced_sampling = true;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_auc = 0.0;   // NaN when the validation split holds one class
};

struct TrainResult {
    ModelParams best_params;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_auc = 0.0;
};

/// A graph context paired with its label; the context must outlive training.
struct LabeledGraph {
    const GraphContext* ctx = nullptr;
    int label = 0;
};

/// Trains one model and keeps the epoch with the highest validation AUC
/// (earliest on ties). When the validation split has a single class the
/// lowest validation loss is used instead.
TrainResult train_fold(std::span<const LabeledGraph> train, std::span<const LabeledGraph> val,
                       const ModelConfig& model_cfg, const TrainConfig& train_cfg, const OptimConfig& optim_cfg);

TrainResult train_fold(std::span<const LesionGraph> train, std::span<const LesionGraph> val,
                       const ModelConfig& model_cfg, const TrainConfig& train_cfg, const OptimConfig& optim_cfg);

/// Mean per-graph BCE of a model over `graphs` in eval mode.
double evaluate_loss(std::span<const LabeledGraph> graphs, const ModelParams& params, const ModelConfig& cfg);

/// Eval-mode probabilities for each graph.
std::vector<double> predict(std::span<const LabeledGraph> graphs, const ModelParams& params,
                            const ModelConfig& cfg);

}  // namespace lgnn
