#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lgnn/cohort.hpp"
#include "lgnn/evaluation.hpp"
#include "lgnn/network.hpp"
#include "lgnn/training.hpp"

namespace lgnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Resolved configuration shared by the cv, sweep and explain commands.
struct RunConfig {
    std::string command;
    std::filesystem::path cohort;
    std::filesystem::path out = "out";
    Task task = Task::one_year;
    ModelConfig model;
    TrainConfig train;
    OptimConfig optim;
    std::size_t jobs = 1;
    std::uint64_t seed = 0;
    bool logistic_baseline = false;
};

struct GenerateArgs {
    std::vector<std::string> overrides;
    std::filesystem::path out = "cohort.jsonl";
    std::uint64_t seed = 0;
};

struct ExplainArgs {
    std::filesystem::path cohort;
    std::filesystem::path checkpoint;
    std::filesystem::path out = "explain";
    std::vector<std::string> patient_ids;  // empty: every patient
};

/// Writes the cohort, spec.json and run.json (next to the cohort file).
void cmd_generate(const GenerateArgs& args, std::ostream& log);
/// folds.csv, per-fold history CSVs, checkpoints/, run.json; returns the report.
FoldReport cmd_cv(const RunConfig& cfg, std::ostream& log);
/// sweep.csv and run.json.
std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<std::string>& values,
                                std::ostream& log);
/// explain.json and region_histogram.csv.
void cmd_explain(const ExplainArgs& args, std::ostream& log);

/// Expands "a..b:step", "a..b" (step 1) or comma lists into value strings.
std::vector<std::string> expand_values(const std::string& spec);

std::string version_string();

/// Parses argv and dispatches. Returns 0 on success, 2 on configuration
/// errors and 1 on runtime failures.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lgnn::cli
