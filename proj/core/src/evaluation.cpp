#include "lgnn/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

namespace lgnn {

std::vector<FoldSplit> make_folds(std::span<const int> labels, std::uint64_t seed, std::size_t n_folds) {
    if (n_folds < 3) throw ParameterError("make_folds needs at least 3 folds");
    if (labels.size() < 2 * n_folds) {
        throw DegenerateDataError("make_folds needs at least " + std::to_string(2 * n_folds) + " samples, got " +
                                  std::to_string(labels.size()));
    }
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw DegenerateDataError("make_folds needs both classes present");

    Rng rng = make_rng(seed, "folds");
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);

    std::vector<std::vector<std::size_t>> parts(n_folds);
    std::size_t dealt = 0;
    for (const auto* cls : {&pos, &neg})
        for (const std::size_t id : *cls) parts[dealt++ % n_folds].push_back(id);
    for (auto& p : parts) std::sort(p.begin(), p.end());

    std::vector<FoldSplit> folds(n_folds);
    for (std::size_t f = 0; f < n_folds; ++f) {
        FoldSplit& s = folds[f];
        s.fold_index = f;
        s.test_ids = parts[f];
        s.val_ids = parts[(f + 1) % n_folds];
        for (std::size_t q = 0; q < n_folds; ++q) {
            if (q == f || q == (f + 1) % n_folds) continue;
            s.train_ids.insert(s.train_ids.end(), parts[q].begin(), parts[q].end());
        }
        std::sort(s.train_ids.begin(), s.train_ids.end());
    }
    return folds;
}

MetricSummary summarize(std::span<const double> values) {
    std::vector<double> finite;
    for (const double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    MetricSummary s;
    if (finite.empty()) {
        s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
        return s;
    }
    double acc = 0.0;
    for (const double v : finite) acc += v;
    s.mean = acc / static_cast<double>(finite.size());
    if (finite.size() > 1) {
        double ss = 0.0;
        for (const double v : finite) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(finite.size() - 1));
    }
    return s;
}

namespace {

FoldMetrics score_fold(std::size_t fold, std::span<const double> scores, std::span<const int> labels) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    FoldMetrics m{fold, nan, nan, nan, nan};
    const auto n_pos = std::count(labels.begin(), labels.end(), 1);
    if (n_pos > 0 && static_cast<std::size_t>(n_pos) < labels.size()) m.auc = roc_auc(scores, labels);
    if (n_pos > 0) {
        const Prf prf = precision_recall_f1(scores, labels);
        m.precision = prf.precision;
        m.recall = prf.recall;
        m.f1 = prf.f1;
    }
    return m;
}

void finalize(FoldReport& report) {
    std::vector<double> auc, precision, recall, f1;
    for (const FoldOutcome& f : report.folds) {
        auc.push_back(f.metrics.auc);
        precision.push_back(f.metrics.precision);
        recall.push_back(f.metrics.recall);
        f1.push_back(f.metrics.f1);
    }
    report.auc = summarize(auc);
    report.precision = summarize(precision);
    report.recall = summarize(recall);
    report.f1 = summarize(f1);
}

/// Runs `task(i)` for i in [0, n) on up to `jobs` threads; rethrows the
/// failure with the smallest index.
template <typename Task>
void run_parallel(std::size_t n, std::size_t jobs, Task task) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, n);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

FoldReport cross_validate(std::span<const LesionGraph> graphs, const ModelConfig& model, const TrainConfig& train,
                          const OptimConfig& optim, const CvOptions& options) {
    model.validate();
    train.validate();
    optim.validate();
    std::vector<int> labels;
    labels.reserve(graphs.size());
    for (const LesionGraph& g : graphs) labels.push_back(g.label);
    const std::vector<FoldSplit> folds = make_folds(labels, derive_seed(train.seed, "folds"), options.n_folds);

    std::vector<GraphContext> contexts;
    contexts.reserve(graphs.size());
    for (const LesionGraph& g : graphs) contexts.push_back(make_context(g));

    std::mutex observer_mutex;
    auto notify = [&](std::size_t fold, CvPhase phase, std::vector<std::size_t> ids) {
        if (!options.observer) return;
        std::lock_guard lock(observer_mutex);
        options.observer(CvEvent{fold, phase, std::move(ids)});
    };
    auto labeled = [&](std::span<const std::size_t> ids) {
        std::vector<LabeledGraph> out;
        out.reserve(ids.size());
        for (const std::size_t id : ids) out.push_back({&contexts[id], labels[id]});
        return out;
    };

    FoldReport report;
    report.model = model;
    report.train = train;
    report.optim = optim;
    report.folds.resize(folds.size());

    run_parallel(folds.size(), options.jobs, [&](std::size_t f) {
        const FoldSplit& split = folds[f];
        try {
            std::vector<std::size_t> seen = split.train_ids;
            seen.insert(seen.end(), split.val_ids.begin(), split.val_ids.end());
            notify(f, CvPhase::training, std::move(seen));

            TrainConfig fold_train = train;
            fold_train.seed = train.seed + f;
            const auto tr = labeled(split.train_ids);
            const auto va = labeled(split.val_ids);
            TrainResult result = train_fold(tr, va, model, fold_train, optim);
            notify(f, CvPhase::selected, {});

            notify(f, CvPhase::testing, split.test_ids);
            const auto te = labeled(split.test_ids);
            FoldOutcome& out = report.folds[f];
            out.test_ids = split.test_ids;
            out.test_scores = predict(te, result.best_params, model);
            for (const LabeledGraph& g : te) out.test_labels.push_back(g.label);
            out.metrics = score_fold(f, out.test_scores, out.test_labels);
            out.training = std::move(result);
        } catch (const FoldError&) {
            throw;
        } catch (const std::exception& e) {
            throw FoldError(f, e.what());
        }
    });
    finalize(report);
    return report;
}

FoldReport cross_validate(const Cohort& cohort, Task task, const ModelConfig& model, const TrainConfig& train,
                          const OptimConfig& optim, const CvOptions& options) {
    model.validate();
    const TaskView view = task_view(cohort, task);
    const std::vector<LesionGraph> graphs = build_graphs(cohort, view, model.graph_config());
    return cross_validate(graphs, model, train, optim, options);
}

FoldReport cross_validate_logistic(std::span<const LesionGraph> graphs, const LogisticConfig& cfg,
                                   std::uint64_t seed, std::size_t n_folds) {
    std::vector<int> labels;
    std::vector<std::vector<double>> features;
    for (const LesionGraph& g : graphs) {
        labels.push_back(g.label);
        features.push_back(mean_feature_vector(g));
    }
    const std::vector<FoldSplit> folds = make_folds(labels, derive_seed(seed, "folds"), n_folds);
    FoldReport report;
    for (const FoldSplit& split : folds) {
        std::vector<std::vector<double>> x;
        std::vector<int> y;
        for (const std::size_t id : split.train_ids) {
            x.push_back(features[id]);
            y.push_back(labels[id]);
        }
        const LogisticModel lr = logistic_regression_fit(x, y, cfg);
        FoldOutcome out;
        out.test_ids = split.test_ids;
        for (const std::size_t id : split.test_ids) {
            out.test_scores.push_back(lr.predict(features[id]));
            out.test_labels.push_back(labels[id]);
        }
        out.metrics = score_fold(split.fold_index, out.test_scores, out.test_labels);
        report.folds.push_back(std::move(out));
    }
    finalize(report);
    return report;
}

std::string_view to_string(SweepAxis axis) noexcept {
    switch (axis) {
        case SweepAxis::r: return "r";
        case SweepAxis::k: return "k";
        case SweepAxis::layers: return "layers";
        case SweepAxis::spm: return "spm";
        case SweepAxis::layer_kind: return "layer_kind";
        case SweepAxis::tau: return "tau";
    }
    return "unknown";
}

std::optional<SweepAxis> sweep_axis_from_string(std::string_view name) noexcept {
    for (const SweepAxis a : {SweepAxis::r, SweepAxis::k, SweepAxis::layers, SweepAxis::spm, SweepAxis::layer_kind,
                              SweepAxis::tau})
        if (to_string(a) == name) return a;
    return std::nullopt;
}

namespace {

double axis_double(std::string_view axis, std::string_view value) {
    const std::string s(value);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
        throw ParameterError("invalid " + std::string(axis) + " value '" + s + "'");
    }
    return v;
}

std::size_t axis_count(std::string_view axis, std::string_view value) {
    const double v = axis_double(axis, value);
    if (v < 1.0 || v != std::floor(v)) {
        throw ParameterError("invalid " + std::string(axis) + " value '" + std::string(value) + "'");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

void apply_axis_value(ModelConfig& cfg, SweepAxis axis, std::string_view value) {
    switch (axis) {
        case SweepAxis::r: cfg.r = axis_double("r", value); break;
        case SweepAxis::k: cfg.k = axis_count("k", value); break;
        case SweepAxis::layers: cfg.hidden_dims = hidden_dims_for_depth(axis_count("layers", value)); break;
        case SweepAxis::tau: cfg.tau = axis_double("tau", value); break;
        case SweepAxis::spm:
            if (value == "on" || value == "true" || value == "1") cfg.use_spm = true;
            else if (value == "off" || value == "false" || value == "0") cfg.use_spm = false;
            else throw ParameterError("invalid spm value '" + std::string(value) + "' (expected on/off)");
            break;
        case SweepAxis::layer_kind: {
            const auto kind = layer_kind_from_string(value);
            if (!kind) throw ParameterError("invalid layer_kind value '" + std::string(value) + "'");
            cfg.layer_kind = *kind;
            break;
        }
    }
    cfg.validate();
}

std::vector<SweepRow> sweep(const Cohort& cohort, Task task, const ModelConfig& base, const TrainConfig& train,
                            const OptimConfig& optim, SweepAxis axis, std::span<const std::string> values,
                            const CvOptions& options) {
    if (values.empty()) throw ParameterError("sweep needs at least one value");
    std::vector<ModelConfig> configs;
    for (const std::string& v : values) {
        ModelConfig cfg = base;
        apply_axis_value(cfg, axis, v);
        configs.push_back(cfg);
    }
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
        rows.push_back({axis, values[i], cross_validate(cohort, task, configs[i], train, optim, options)});
    }
    return rows;
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void write_folds_csv(std::ostream& os, const FoldReport& report) {
    os << "fold,auc,precision,recall,f1\n";
    for (const FoldOutcome& f : report.folds) {
        os << f.metrics.fold << ',' << fixed6(f.metrics.auc) << ',' << fixed6(f.metrics.precision) << ','
           << fixed6(f.metrics.recall) << ',' << fixed6(f.metrics.f1) << '\n';
    }
}

void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
    os << "axis,value,mean_auc,std_auc,mean_f1,std_f1\n";
    for (const SweepRow& r : rows) {
        os << to_string(r.axis) << ',' << r.value << ',' << fixed6(r.report.auc.mean) << ','
           << fixed6(r.report.auc.std) << ',' << fixed6(r.report.f1.mean) << ',' << fixed6(r.report.f1.std)
           << '\n';
    }
}

void write_history_csv(std::ostream& os, std::span<const EpochRecord> history) {
    os << "epoch,train_loss,val_auc\n";
    for (const EpochRecord& e : history) {
        os << e.epoch << ',' << fixed6(e.train_loss) << ',' << fixed6(e.val_auc) << '\n';
    }
}

std::string format_summary(const MetricSummary& m) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f \xC2\xB1 %.3f", m.mean, m.std);
    return buf;
}

}  // namespace lgnn
