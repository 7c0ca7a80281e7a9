#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgnn/cohort.hpp"
#include "lgnn/error.hpp"
#include "lgnn/metrics.hpp"
#include "lgnn/network.hpp"
#include "lgnn/training.hpp"

namespace lgnn {

/// Positions refer to the sample list the folds were built from.
struct FoldSplit {
    std::size_t fold_index = 0;
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> val_ids;
    std::vector<std::size_t> test_ids;
};

/// Stratified rotating split: both classes are shuffled and dealt round-robin
/// into `n_folds` partitions; fold i tests on partition i, validates on
/// partition i+1 (mod n_folds) and trains on the rest.
std::vector<FoldSplit> make_folds(std::span<const int> labels, std::uint64_t seed, std::size_t n_folds = 10);

struct FoldMetrics {
    std::size_t fold = 0;
    double auc = 0.0;  // NaN when the test partition holds a single class
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct FoldOutcome {
    FoldMetrics metrics;
    std::vector<std::size_t> test_ids;
    std::vector<double> test_scores;
    std::vector<int> test_labels;
    TrainResult training;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // sample (n-1) standard deviation
};

/// Mean and sample standard deviation over the finite entries.
MetricSummary summarize(std::span<const double> values);

struct FoldReport {
    std::vector<FoldOutcome> folds;
    MetricSummary auc;
    MetricSummary precision;
    MetricSummary recall;
    MetricSummary f1;
    ModelConfig model;
    TrainConfig train;
    OptimConfig optim;
};

enum class CvPhase {
    training,  // ids: train + val positions handed to the trainer
    selected,  // checkpoint chosen; ids empty
    testing,   // ids: test positions about to be scored
};

struct CvEvent {
    std::size_t fold = 0;
    CvPhase phase = CvPhase::training;
    std::vector<std::size_t> ids;
};

struct CvOptions {
    std::size_t jobs = 1;
    std::size_t n_folds = 10;
    /// Called (serialised) as each fold moves through its phases.
    std::function<void(const CvEvent&)> observer;
};

/// Raised when a fold fails; carries the fold index in the message.
class FoldError : public Error {
public:
    FoldError(std::size_t fold, const std::string& what)
        : Error("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}
    std::size_t fold() const noexcept { return fold_; }

private:
    std::size_t fold_;
};

/// Ten-fold CV over prepared graphs (labels taken from the graphs). Folds
/// come from derive_seed(train.seed, "folds"); fold i trains with seed
/// train.seed + i.
FoldReport cross_validate(std::span<const LesionGraph> graphs, const ModelConfig& model, const TrainConfig& train,
                          const OptimConfig& optim, const CvOptions& options = {});

/// Builds the task's graphs with the model's k/tau, then cross-validates.
FoldReport cross_validate(const Cohort& cohort, Task task, const ModelConfig& model, const TrainConfig& train,
                          const OptimConfig& optim, const CvOptions& options = {});

/// Logistic-regression baseline on mean lesion features, on the same folds
/// as cross_validate with the same seed.
FoldReport cross_validate_logistic(std::span<const LesionGraph> graphs, const LogisticConfig& cfg,
                                   std::uint64_t seed, std::size_t n_folds = 10);

enum class SweepAxis { r, k, layers, spm, layer_kind, tau };

std::string_view to_string(SweepAxis axis) noexcept;
std::optional<SweepAxis> sweep_axis_from_string(std::string_view name) noexcept;

/// Sets one axis value on a config; throws ParameterError when invalid.
void apply_axis_value(ModelConfig& cfg, SweepAxis axis, std::string_view value);

struct SweepRow {
    SweepAxis axis = SweepAxis::r;
    std::string value;
    FoldReport report;
};

/// One cross-validation per value on identical folds.
std::vector<SweepRow> sweep(const Cohort& cohort, Task task, const ModelConfig& base, const TrainConfig& train,
                            const OptimConfig& optim, SweepAxis axis, std::span<const std::string> values,
                            const CvOptions& options = {});

// CSV writers; floats use six decimals.
void write_folds_csv(std::ostream& os, const FoldReport& report);
void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows);
void write_history_csv(std::ostream& os, std::span<const EpochRecord> history);

/// "0.671 ± 0.062" style summary.
std::string format_summary(const MetricSummary& m);

}  // namespace lgnn
