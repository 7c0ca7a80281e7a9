#include <benchmark/benchmark.h>

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "lgnn/cohort.hpp"
#include "lgnn/graph.hpp"
#include "lgnn/layers.hpp"
#include "lgnn/network.hpp"
#include "lgnn/training.hpp"

using namespace lgnn;

namespace {

Tensor filled(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t(r, c);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : t.data()) v = n(rng);
    return t;
}

const Cohort& cohort() {
    static const Cohort c = generate_cohort(CohortSpec{});
    return c;
}

// largest patient in the default cohort, 40 lesions at most
const PatientRecord& big_patient() {
    static const PatientRecord& p = *std::max_element(cohort().begin(), cohort().end(), [](const auto& a, const auto& b) {
        return a.lesions.size() < b.lesions.size();
    });
    return p;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Tensor a = filled(n, 64, rng), b = filled(64, 64, rng);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * 64 * 64));
}
BENCHMARK(BM_Matmul)->Arg(8)->Arg(40)->Arg(256);

void BM_KnnGraph(benchmark::State& state) {
    const PatientRecord& p = big_patient();
    for (auto _ : state) benchmark::DoNotOptimize(build_graph(p.patient_id, p.lesions, p.label_1y, GraphConfig{}));
}
BENCHMARK(BM_KnnGraph);

void BM_LayerForwardBackward(benchmark::State& state) {
    const auto kind = static_cast<LayerKind>(state.range(0));
    const PatientRecord& p = big_patient();
    const GraphContext ctx = make_context(build_graph(p.patient_id, p.lesions, p.label_1y, GraphConfig{}));
    Rng rng(2);
    LayerParams params = init_layer(kind, ctx.features.cols(), 64, "l", rng);
    for (auto _ : state) {
        Tape tape;
        const Var out = sum(layer_forward(tape, tape.constant(ctx.features), ctx, params));
        tape.backward(out);
    }
    state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_LayerForwardBackward)->DenseRange(0, 3);

void BM_ModelForward(benchmark::State& state) {
    const PatientRecord& p = big_patient();
    const GraphContext ctx = make_context(build_graph(p.patient_id, p.lesions, p.label_1y, GraphConfig{}));
    Rng rng(3);
    const ModelConfig cfg;
    const ModelParams params = init_params(cfg, rng);
    for (auto _ : state) benchmark::DoNotOptimize(forward(ctx, params, cfg, Mode::eval, rng));
}
BENCHMARK(BM_ModelForward);

void BM_TrainEpoch(benchmark::State& state) {
    const auto graphs = build_graphs(cohort(), task_view(cohort(), Task::one_year), GraphConfig{});
    const std::span<const LesionGraph> all(graphs);
    TrainConfig tc;
    tc.epochs = 1;
    for (auto _ : state)
        benchmark::DoNotOptimize(train_fold(all.subspan(0, 344), all.subspan(344, 43), ModelConfig{}, tc, OptimConfig{}));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
