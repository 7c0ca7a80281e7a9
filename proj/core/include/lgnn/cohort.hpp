#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgnn/graph.hpp"

namespace lgnn {

struct CohortSpec {
    std::size_t n_patients = 430;
    double positive_fraction = 303.0 / 430.0;
    std::size_t min_lesions = 2;
    std::size_t max_lesions = 40;
    /// Total per-lesion feature width; the last three entries hold the position.
    std::size_t feature_dim = 16;
    double signal_fraction = 0.5;
    /// Mean shift applied to every non-positional feature of a signal lesion,
    /// with a fixed random sign per feature.
    double signal_strength = 1.0;
    /// Anchor-choice weights for signal lesions, indexed like kAllRegions.
    std::array<double, 4> region_priors{0.45, 0.05, 0.25, 0.25};
    /// Spread of signal-lesion positions around their anchor.
    double signal_spread = 0.1;
    std::size_t n_two_year = 347;
    double label_2y_flip = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const CohortSpec&, const CohortSpec&) = default;
};

/// Applies one "key=value" override (field names as in CohortSpec;
/// region_priors takes four comma-separated weights).
void apply_override(CohortSpec& spec, std::string_view assignment);
std::string to_json(const CohortSpec& spec);

/// Fixed region anchors in normalized coordinates, indexed like kAllRegions.
const std::array<Position, 4>& region_anchors() noexcept;
Region nearest_region(const Position& p) noexcept;

struct PatientRecord {
    std::string patient_id;
    int label_1y = 0;
    std::optional<int> label_2y;
    std::vector<Lesion> lesions;
    /// Generator ground truth: which lesions carry the planted signal. Empty
    /// when unknown (e.g. a cohort file without the "signal" field).
    std::vector<bool> signal;

    friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

using Cohort = std::vector<PatientRecord>;

Cohort generate_cohort(const CohortSpec& spec);

/// JSON Lines, one patient per line:
/// {"id","label_1y","label_2y"|null,"lesions":[{"pos","region","feat"}],"signal":[...]}
void save_cohort(const Cohort& cohort, const std::filesystem::path& path);
Cohort load_cohort(const std::filesystem::path& path);
std::string cohort_to_jsonl(const Cohort& cohort);
Cohort cohort_from_jsonl(std::string_view text);

struct CohortStats {
    std::size_t n_patients = 0;
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;
    double positive_fraction = 0.0;
    std::size_t n_with_2y = 0;
    std::size_t total_lesions = 0;
    std::map<std::size_t, std::size_t> lesion_count_histogram;  // lesion count -> patients
    std::array<std::size_t, 4> region_counts{};
    std::array<double, 4> region_fractions{};
};

CohortStats cohort_stats(const Cohort& cohort);

enum class Task { one_year, two_year };

std::string_view to_string(Task t) noexcept;
std::optional<Task> task_from_string(std::string_view name) noexcept;

/// Patients usable for a task, with their labels. Throws SchemaError for the
/// two-year task when no patient carries label_2y.
struct TaskView {
    std::vector<std::size_t> patient_index;  // into the cohort
    std::vector<int> labels;
};
TaskView task_view(const Cohort& cohort, Task task);

std::vector<LesionGraph> build_graphs(const Cohort& cohort, const TaskView& view, const GraphConfig& cfg);

}  // namespace lgnn
