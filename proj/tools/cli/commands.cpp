#include "cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lgnn/checkpoint.hpp"
#include "lgnn/error.hpp"

namespace lgnn::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string version_string() {
#ifdef LGNN_VERSION
    return std::string("lgnn ") + LGNN_VERSION;
#else
    return "lgnn dev";
#endif
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

ordered_json run_manifest(const RunConfig& cfg) {
    ordered_json j;
    j["command"] = cfg.command;
    j["version"] = version_string();
    j["seed"] = cfg.seed;
    j["cohort"] = cfg.cohort.string();
    j["task"] = std::string(to_string(cfg.task));
    j["model"] = ordered_json::parse(to_json(cfg.model));
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"balanced_sampling", cfg.train.balanced_sampling},
                  {"seed", cfg.train.seed}};
    j["optim"] = {{"lr", cfg.optim.lr},
                  {"weight_decay", cfg.optim.weight_decay},
                  {"beta1", cfg.optim.beta1},
                  {"beta2", cfg.optim.beta2},
                  {"eps", cfg.optim.eps}};
    j["jobs"] = cfg.jobs;
    if (cfg.logistic_baseline) j["baseline"] = "logistic";
    return j;
}

std::string fold_name(const char* prefix, std::size_t fold, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%02zu%s", prefix, fold, ext);
    return buf;
}

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

double parse_number(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ParameterError("invalid number '" + s + "' in --values");
    return v;
}

}  // namespace

std::vector<std::string> expand_values(const std::string& spec) {
    if (spec.empty()) throw ParameterError("--values is empty");
    const auto dots = spec.find("..");
    if (dots == std::string::npos) {
        std::vector<std::string> out;
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) throw ParameterError("empty item in --values '" + spec + "'");
            out.push_back(item);
        }
        return out;
    }
    const std::string start_s = spec.substr(0, dots);
    std::string end_s = spec.substr(dots + 2);
    std::string step_s = "1";
    if (const auto colon = end_s.find(':'); colon != std::string::npos) {
        step_s = end_s.substr(colon + 1);
        end_s = end_s.substr(0, colon);
    }
    const double start = parse_number(start_s), end = parse_number(end_s), step = parse_number(step_s);
    if (!(step > 0.0) || end < start) throw ParameterError("invalid range in --values '" + spec + "'");
    const auto count = static_cast<std::size_t>(std::floor((end - start) / step + 1e-9)) + 1;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(format_value(start + static_cast<double>(i) * step));
    return out;
}

void cmd_generate(const GenerateArgs& args, std::ostream& log) {
    CohortSpec spec;
    spec.seed = args.seed;
    for (const std::string& o : args.overrides) apply_override(spec, o);
    spec.validate();
    const Cohort cohort = generate_cohort(spec);

    const fs::path dir = args.out.has_parent_path() ? args.out.parent_path() : fs::path(".");
    ensure_dir(dir);
    save_cohort(cohort, args.out);
    write_text(dir / "spec.json", to_json(spec) + "\n");

    ordered_json manifest;
    manifest["command"] = "generate";
    manifest["version"] = version_string();
    manifest["seed"] = spec.seed;
    manifest["out"] = args.out.string();
    manifest["spec"] = ordered_json::parse(to_json(spec));
    write_text(dir / "run.json", manifest.dump(2) + "\n");

    const CohortStats stats = cohort_stats(cohort);
    log << "wrote " << stats.n_patients << " patients (" << stats.n_positive << " positive, " << stats.n_negative
        << " negative) to " << args.out.string() << "\n";
}

FoldReport cmd_cv(const RunConfig& cfg, std::ostream& log) {
    const Cohort cohort = load_cohort(cfg.cohort);
    ensure_dir(cfg.out);
    CvOptions options;
    options.jobs = cfg.jobs;

    FoldReport report;
    if (cfg.logistic_baseline) {
        const TaskView view = task_view(cohort, cfg.task);
        const auto graphs = build_graphs(cohort, view, cfg.model.graph_config());
        report = cross_validate_logistic(graphs, LogisticConfig{}, cfg.train.seed);
    } else {
        report = cross_validate(cohort, cfg.task, cfg.model, cfg.train, cfg.optim, options);
    }

    {
        std::ofstream os(cfg.out / "folds.csv", std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write folds.csv");
        write_folds_csv(os, report);
    }
    if (!cfg.logistic_baseline) {
        ensure_dir(cfg.out / "checkpoints");
        for (const FoldOutcome& f : report.folds) {
            save_checkpoint(cfg.out / "checkpoints" / fold_name("fold_", f.metrics.fold, ".ckpt"), cfg.model,
                            f.training.best_params);
            std::ofstream os(cfg.out / fold_name("history_fold_", f.metrics.fold, ".csv"),
                             std::ios::binary | std::ios::trunc);
            write_history_csv(os, f.training.history);
        }
    }
    write_text(cfg.out / "run.json", run_manifest(cfg).dump(2) + "\n");

    log << "AUC " << format_summary(report.auc) << "\n";
    log << "precision " << format_summary(report.precision) << "\n";
    log << "recall " << format_summary(report.recall) << "\n";
    log << "f1 " << format_summary(report.f1) << "\n";
    return report;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<std::string>& values,
                                std::ostream& log) {
    const Cohort cohort = load_cohort(cfg.cohort);
    ensure_dir(cfg.out);
    CvOptions options;
    options.jobs = cfg.jobs;
    const auto rows = sweep(cohort, cfg.task, cfg.model, cfg.train, cfg.optim, axis, values, options);
    {
        std::ofstream os(cfg.out / "sweep.csv", std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write sweep.csv");
        write_sweep_csv(os, rows);
    }
    ordered_json manifest = run_manifest(cfg);
    manifest["axis"] = std::string(to_string(axis));
    manifest["values"] = values;
    write_text(cfg.out / "run.json", manifest.dump(2) + "\n");
    for (const SweepRow& r : rows) {
        log << to_string(axis) << "=" << r.value << "  AUC " << format_summary(r.report.auc) << "\n";
    }
    return rows;
}

void cmd_explain(const ExplainArgs& args, std::ostream& log) {
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const Cohort cohort = load_cohort(args.cohort);
    ensure_dir(args.out);

    std::vector<const PatientRecord*> selected;
    if (args.patient_ids.empty()) {
        for (const PatientRecord& rec : cohort) selected.push_back(&rec);
    } else {
        std::map<std::string, const PatientRecord*> by_id;
        for (const PatientRecord& rec : cohort) by_id[rec.patient_id] = &rec;
        for (const std::string& id : args.patient_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw InputError("patient id not found in cohort: " + id);
            selected.push_back(it->second);
        }
    }

    std::array<std::size_t, 4> pre{}, post{};
    ordered_json patients = ordered_json::array();
    Rng unused(0);
    for (const PatientRecord* rec : selected) {
        const LesionGraph graph = build_graph(rec->patient_id, rec->lesions, rec->label_1y, ckpt.config.graph_config());
        if (graph.feature_dim() != ckpt.config.feature_dim) {
            throw SchemaError("patient " + rec->patient_id + " has feature dimension " +
                              std::to_string(graph.feature_dim()) + ", checkpoint expects " +
                              std::to_string(ckpt.config.feature_dim));
        }
        const ForwardResult res = forward(graph, ckpt.params, ckpt.config, Mode::eval, unused);
        std::vector<bool> kept(graph.num_nodes(), false);
        for (const std::size_t i : res.pruning.retained) kept[i] = true;

        ordered_json lesions = ordered_json::array();
        for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
            const Lesion& l = rec->lesions[i];
            ordered_json lj;
            lj["index"] = i;
            lj["score"] = res.pruning.scores.empty() ? ordered_json(nullptr) : ordered_json(res.pruning.scores[i]);
            lj["retained"] = static_cast<bool>(kept[i]);
            lj["pos"] = l.position;
            lj["region"] = std::string(to_string(l.region));
            if (!rec->signal.empty()) lj["signal"] = static_cast<bool>(rec->signal[i]);
            lesions.push_back(std::move(lj));
            ++pre[static_cast<std::size_t>(l.region)];
            if (kept[i]) ++post[static_cast<std::size_t>(l.region)];
        }
        ordered_json pj;
        pj["id"] = rec->patient_id;
        pj["label_1y"] = rec->label_1y;
        pj["probability"] = res.probability;
        pj["n_lesions"] = graph.num_nodes();
        pj["n_retained"] = res.pruning.retained.size();
        pj["lesions"] = std::move(lesions);
        patients.push_back(std::move(pj));
    }

    ordered_json out;
    out["checkpoint"] = args.checkpoint.string();
    out["model"] = ordered_json::parse(to_json(ckpt.config));
    out["patients"] = std::move(patients);
    write_text(args.out / "explain.json", out.dump(2) + "\n");

    std::size_t pre_total = 0, post_total = 0;
    for (std::size_t r = 0; r < 4; ++r) {
        pre_total += pre[r];
        post_total += post[r];
    }
    std::ostringstream csv;
    csv << "region,pre_count,pre_fraction,post_count,post_fraction\n";
    for (std::size_t r = 0; r < 4; ++r) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%zu,%.6f\n", std::string(to_string(kAllRegions[r])).c_str(),
                      pre[r], pre_total ? static_cast<double>(pre[r]) / static_cast<double>(pre_total) : 0.0,
                      post[r], post_total ? static_cast<double>(post[r]) / static_cast<double>(post_total) : 0.0);
        csv << buf;
    }
    write_text(args.out / "region_histogram.csv", csv.str());

    ordered_json manifest;
    manifest["command"] = "explain";
    manifest["version"] = version_string();
    manifest["cohort"] = args.cohort.string();
    manifest["checkpoint"] = args.checkpoint.string();
    manifest["patient_ids"] = args.patient_ids;
    write_text(args.out / "run.json", manifest.dump(2) + "\n");

    log << "explained " << selected.size() << " patients; " << post_total << " of " << pre_total
        << " lesions retained\n";
}

namespace {

struct CommonFlags {
    std::string cohort;
    std::string out = "out";
    std::string task = "1y";
    std::string layer = "gcn";
    std::string model = "graph";
    bool no_spm = false;
    double r = 0.5;
    std::size_t k = 5;
    double tau = 0.01;
    double distance_floor = 0.0;
    std::size_t layers = 2;
    std::size_t epochs = 300;
    std::size_t batch_size = 16;
    double lr = 1e-4;
    double weight_decay = 1e-4;
    double dropout = 0.5;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    bool no_balance = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--cohort", f.cohort, "cohort JSONL file")->required()->check(CLI::ExistingFile);
    app->add_option("--out", f.out, "output directory");
    app->add_option("--task", f.task, "prediction task")->check(CLI::IsMember({"1y", "2y"}));
    app->add_option("--layer", f.layer, "message-passing layer")->check(CLI::IsMember({"gcn", "sage", "edge", "gat"}));
    app->add_option("--model", f.model, "graph, set_proc or logistic")
        ->check(CLI::IsMember({"graph", "set_proc", "logistic"}));
    app->add_flag("--no-spm", f.no_spm, "disable the self-pruning module");
    app->add_option("--r", f.r, "retention ratio");
    app->add_option("--k", f.k, "kNN neighbor count");
    app->add_option("--tau", f.tau, "edge-weight distance scale");
    app->add_option("--distance-floor", f.distance_floor, "lower clamp for edge weights");
    app->add_option("--layers", f.layers, "number of message-passing layers");
    app->add_option("--epochs", f.epochs, "training epochs");
    app->add_option("--batch-size", f.batch_size, "mini-batch size");
    app->add_option("--lr", f.lr, "AdamW learning rate");
    app->add_option("--weight-decay", f.weight_decay, "AdamW decoupled weight decay");
    app->add_option("--dropout", f.dropout, "dropout probability");
    app->add_option("--seed", f.seed, "master seed");
    app->add_option("--jobs", f.jobs, "concurrent folds");
    app->add_flag("--no-balance", f.no_balance, "plain shuffled batches instead of balanced sampling");
}

RunConfig resolve(const std::string& command, const CommonFlags& f) {
    RunConfig cfg;
    cfg.command = command;
    cfg.cohort = f.cohort;
    cfg.out = f.out;
    cfg.task = *task_from_string(f.task);
    cfg.model.layer_kind = *layer_kind_from_string(f.layer);
    cfg.model.architecture = f.model == "set_proc" ? Architecture::set_proc : Architecture::graph;
    cfg.logistic_baseline = f.model == "logistic";
    cfg.model.use_spm = !f.no_spm;
    cfg.model.r = f.r;
    cfg.model.k = f.k;
    cfg.model.tau = f.tau;
    cfg.model.distance_floor = f.distance_floor;
    cfg.model.hidden_dims = hidden_dims_for_depth(f.layers);
    cfg.model.dropout = f.dropout;
    cfg.train.epochs = f.epochs;
    cfg.train.batch_size = f.batch_size;
    cfg.train.balanced_sampling = !f.no_balance;
    cfg.train.seed = f.seed;
    cfg.optim.lr = f.lr;
    cfg.optim.weight_decay = f.weight_decay;
    cfg.jobs = f.jobs;
    cfg.seed = f.seed;

    // Feature width comes from the cohort file.
    const Cohort cohort = load_cohort(cfg.cohort);
    if (cohort.empty()) throw SchemaError("cohort file is empty: " + cfg.cohort.string());
    cfg.model.feature_dim = cohort.front().lesions.front().features.size();
    cfg.model.validate();
    cfg.train.validate();
    cfg.optim.validate();
    return cfg;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lesion-graph disease-activity classifier", "lgnn"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string());

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "generate a synthetic cohort");
    generate->add_option("--spec", gen.overrides, "key=value overrides of the cohort spec");
    generate->add_option("--out", gen.out, "output JSONL path");
    generate->add_option("--seed", gen.seed, "generator seed");

    CommonFlags cv_flags;
    auto* cv = app.add_subcommand("cv", "ten-fold cross-validation");
    add_common(cv, cv_flags);

    CommonFlags sweep_flags;
    std::string axis_name;
    std::string values_spec;
    auto* sweep_cmd = app.add_subcommand("sweep", "cross-validate across one hyperparameter axis");
    add_common(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--axis", axis_name, "r, k, layers, spm, layer_kind or tau")
        ->required()
        ->check(CLI::IsMember({"r", "k", "layers", "spm", "layer_kind", "tau"}));
    sweep_cmd->add_option("--values", values_spec, "a..b:step, a..b or comma list");

    ExplainArgs explain_args;
    std::string cohort_path, ckpt_path, out_dir = "explain", ids;
    auto* explain = app.add_subcommand("explain", "export per-lesion SPM scores for a checkpoint");
    explain->add_option("--cohort", cohort_path, "cohort JSONL file")->required()->check(CLI::ExistingFile);
    explain->add_option("--checkpoint", ckpt_path, "checkpoint file")->required()->check(CLI::ExistingFile);
    explain->add_option("--out", out_dir, "output directory");
    explain->add_option("--ids", ids, "comma-separated patient ids (default: all)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (generate->parsed()) {
            cmd_generate(gen, out);
        } else if (cv->parsed()) {
            cmd_cv(resolve("cv", cv_flags), out);
        } else if (sweep_cmd->parsed()) {
            const SweepAxis axis = *sweep_axis_from_string(axis_name);
            std::vector<std::string> values;
            if (values_spec.empty()) {
                if (axis != SweepAxis::spm) throw ParameterError("--values is required for axis " + axis_name);
                values = {"on", "off"};
            } else {
                values = expand_values(values_spec);
            }
            cmd_sweep(resolve("sweep", sweep_flags), axis, values, out);
        } else if (explain->parsed()) {
            explain_args.cohort = cohort_path;
            explain_args.checkpoint = ckpt_path;
            explain_args.out = out_dir;
            if (!ids.empty()) explain_args.patient_ids = expand_values(ids);
            cmd_explain(explain_args, out);
        }
    } catch (const ParameterError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.push_back("lgnn");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (std::string& s : storage) argv.push_back(s.data());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace lgnn::cli
