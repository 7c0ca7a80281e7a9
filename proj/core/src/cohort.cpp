#include "lgnn/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lgnn/error.hpp"
#include "lgnn/random.hpp"

namespace lgnn {

using ordered_json = nlohmann::ordered_json;

void CohortSpec::validate() const {
    auto fraction_ok = [](double f) { return f > 0.0 && f <= 1.0; };
    if (n_patients < 1) throw ParameterError("n_patients must be >= 1");
    if (!fraction_ok(positive_fraction)) throw ParameterError("positive_fraction must lie in (0,1]");
    if (!fraction_ok(signal_fraction)) throw ParameterError("signal_fraction must lie in (0,1]");
    if (min_lesions < 1 || max_lesions < min_lesions) throw ParameterError("lesion count range must satisfy 1 <= min <= max");
    if (feature_dim < 4) throw ParameterError("feature_dim must be >= 4");
    if (!(signal_strength >= 0.0) || !std::isfinite(signal_strength)) throw ParameterError("signal_strength must be >= 0");
    if (!(signal_spread > 0.0)) throw ParameterError("signal_spread must be positive");
    if (!(label_2y_flip >= 0.0 && label_2y_flip <= 1.0)) throw ParameterError("label_2y_flip must lie in [0,1]");
    double total = 0.0;
    for (const double w : region_priors) {
        if (!(w >= 0.0)) throw ParameterError("region_priors must be non-negative");
        total += w;
    }
    if (!(total > 0.0)) throw ParameterError("region_priors must not all be zero");
}

namespace {

double parse_double(std::string_view key, std::string_view text) {
    // std::from_chars for double is unavailable in some standard libraries.
    std::string s(text);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw ParameterError("invalid value '" + s + "' for " + std::string(key));
    }
    return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParameterError("invalid integer '" + std::string(text) + "' for " + std::string(key));
    }
    return v;
}

}  // namespace

void apply_override(CohortSpec& spec, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ParameterError("override must be key=value: " + std::string(assignment));
    const std::string_view key = assignment.substr(0, eq);
    const std::string_view value = assignment.substr(eq + 1);
    if (key == "n_patients") spec.n_patients = parse_uint(key, value);
    else if (key == "positive_fraction") spec.positive_fraction = parse_double(key, value);
    else if (key == "min_lesions") spec.min_lesions = parse_uint(key, value);
    else if (key == "max_lesions") spec.max_lesions = parse_uint(key, value);
    else if (key == "feature_dim") spec.feature_dim = parse_uint(key, value);
    else if (key == "signal_fraction") spec.signal_fraction = parse_double(key, value);
    else if (key == "signal_strength") spec.signal_strength = parse_double(key, value);
    else if (key == "signal_spread") spec.signal_spread = parse_double(key, value);
    else if (key == "n_two_year") spec.n_two_year = parse_uint(key, value);
    else if (key == "label_2y_flip") spec.label_2y_flip = parse_double(key, value);
    else if (key == "seed") spec.seed = parse_uint(key, value);
    else if (key == "region_priors") {
        std::array<double, 4> priors{};
        std::size_t idx = 0;
        std::string_view rest = value;
        while (true) {
            const auto comma = rest.find(',');
            if (idx >= 4) throw ParameterError("region_priors takes exactly four weights");
            priors[idx++] = parse_double(key, rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        if (idx != 4) throw ParameterError("region_priors takes exactly four weights");
        spec.region_priors = priors;
    } else {
        throw ParameterError("unknown cohort spec key: " + std::string(key));
    }
}

std::string to_json(const CohortSpec& spec) {
    ordered_json j;
    j["n_patients"] = spec.n_patients;
    j["positive_fraction"] = spec.positive_fraction;
    j["min_lesions"] = spec.min_lesions;
    j["max_lesions"] = spec.max_lesions;
    j["feature_dim"] = spec.feature_dim;
    j["signal_fraction"] = spec.signal_fraction;
    j["signal_strength"] = spec.signal_strength;
    j["region_priors"] = spec.region_priors;
    j["signal_spread"] = spec.signal_spread;
    j["n_two_year"] = spec.n_two_year;
    j["label_2y_flip"] = spec.label_2y_flip;
    j["seed"] = spec.seed;
    return j.dump(2);
}

const std::array<Position, 4>& region_anchors() noexcept {
    static const std::array<Position, 4> anchors = {{
        {0.50, 0.50, 0.55},  // periventricular
        {0.25, 0.75, 0.70},  // subcortical
        {0.80, 0.30, 0.80},  // juxtacortical
        {0.50, 0.35, 0.15},  // infratentorial
    }};
    return anchors;
}

Region nearest_region(const Position& p) noexcept {
    const auto& anchors = region_anchors();
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        double d = 0.0;
        for (std::size_t c = 0; c < 3; ++c) d += (p[c] - anchors[a][c]) * (p[c] - anchors[a][c]);
        if (d < best_d) {
            best_d = d;
            best = a;
        }
    }
    return kAllRegions[best];
}

Cohort generate_cohort(const CohortSpec& spec) {
    spec.validate();
    const std::size_t n_feat = spec.feature_dim - 3;

    Rng dir_rng = make_rng(spec.seed, "direction");
    std::vector<double> shift(n_feat);
    std::bernoulli_distribution coin(0.5);
    for (double& s : shift) s = (coin(dir_rng) ? 1.0 : -1.0) * spec.signal_strength;

    const auto n_pos = static_cast<std::size_t>(
        std::llround(static_cast<double>(spec.n_patients) * spec.positive_fraction));
    std::vector<int> labels(spec.n_patients, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(std::min(n_pos, spec.n_patients)), 1);
    Rng label_rng = make_rng(spec.seed, "labels");
    std::shuffle(labels.begin(), labels.end(), label_rng);

    std::vector<std::size_t> order(spec.n_patients);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), label_rng);
    std::vector<bool> has_2y(spec.n_patients, false);
    for (std::size_t i = 0; i < std::min(spec.n_two_year, spec.n_patients); ++i) has_2y[order[i]] = true;

    const std::uint64_t patient_seed = derive_seed(spec.seed, "patients");
    const auto& anchors = region_anchors();
    const double log_lo = std::log(static_cast<double>(spec.min_lesions));
    const double log_hi = std::log(static_cast<double>(spec.max_lesions + 1));

    Cohort cohort;
    cohort.reserve(spec.n_patients);
    for (std::size_t p = 0; p < spec.n_patients; ++p) {
        Rng rng(derive_seed(patient_seed, p));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::discrete_distribution<std::size_t> pick_anchor(spec.region_priors.begin(), spec.region_priors.end());

        PatientRecord rec;
        char id[32];
        std::snprintf(id, sizeof(id), "P%04zu", p + 1);
        rec.patient_id = id;
        rec.label_1y = labels[p];

        const double draw = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
        const std::size_t count =
            std::clamp(static_cast<std::size_t>(std::floor(draw)), spec.min_lesions, spec.max_lesions);
        std::size_t n_signal = 0;
        if (rec.label_1y == 1) {
            const double x = spec.signal_fraction * static_cast<double>(count);
            const double nearest = std::round(x);
            n_signal = static_cast<std::size_t>(std::abs(x - nearest) <= 1e-9 ? nearest : std::ceil(x));
            n_signal = std::min(n_signal, count);
        }
        std::vector<bool> is_signal(count, false);
        std::fill(is_signal.begin(), is_signal.begin() + static_cast<std::ptrdiff_t>(n_signal), true);
        std::shuffle(is_signal.begin(), is_signal.end(), rng);

        for (std::size_t l = 0; l < count; ++l) {
            Lesion lesion;
            if (is_signal[l]) {
                const Position& anchor = anchors[pick_anchor(rng)];
                for (std::size_t c = 0; c < 3; ++c) {
                    lesion.position[c] = std::clamp(anchor[c] + spec.signal_spread * gauss(rng), 0.0, 1.0);
                }
            } else {
                for (double& c : lesion.position) c = unit(rng);
            }
            lesion.region = nearest_region(lesion.position);
            lesion.features.resize(spec.feature_dim);
            for (std::size_t f = 0; f < n_feat; ++f) {
                lesion.features[f] = gauss(rng) + (is_signal[l] ? shift[f] : 0.0);
            }
            for (std::size_t c = 0; c < 3; ++c) lesion.features[n_feat + c] = lesion.position[c];
            rec.lesions.push_back(std::move(lesion));
        }
        rec.signal = std::move(is_signal);
        if (has_2y[p]) {
            const bool flip = unit(rng) < spec.label_2y_flip;
            rec.label_2y = flip ? 1 - rec.label_1y : rec.label_1y;
        }
        cohort.push_back(std::move(rec));
    }
    return cohort;
}

std::string cohort_to_jsonl(const Cohort& cohort) {
    std::string out;
    for (const PatientRecord& rec : cohort) {
        ordered_json j;
        j["id"] = rec.patient_id;
        j["label_1y"] = rec.label_1y;
        j["label_2y"] = rec.label_2y ? ordered_json(*rec.label_2y) : ordered_json(nullptr);
        ordered_json lesions = ordered_json::array();
        for (const Lesion& l : rec.lesions) {
            ordered_json lj;
            lj["pos"] = l.position;
            lj["region"] = std::string(to_string(l.region));
            lj["feat"] = l.features;
            lesions.push_back(std::move(lj));
        }
        j["lesions"] = std::move(lesions);
        if (!rec.signal.empty()) {
            ordered_json sig = ordered_json::array();
            for (const bool b : rec.signal) sig.push_back(b);
            j["signal"] = std::move(sig);
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

void save_cohort(const Cohort& cohort, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open cohort file for writing: " + path.string());
    const std::string text = cohort_to_jsonl(cohort);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw IoError("failed writing cohort file: " + path.string());
}

namespace {

int parse_label(const ordered_json& v, std::size_t line, const char* field) {
    if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
        throw SchemaError("line " + std::to_string(line) + ": " + field + " must be 0 or 1");
    }
    return v.get<int>();
}

PatientRecord parse_patient(const ordered_json& j, std::size_t line) {
    auto schema = [line](const std::string& what) {
        return SchemaError("line " + std::to_string(line) + ": " + what);
    };
    if (!j.is_object()) throw schema("record is not a JSON object");
    PatientRecord rec;
    try {
        rec.patient_id = j.at("id").get<std::string>();
        rec.label_1y = parse_label(j.at("label_1y"), line, "label_1y");
        if (j.contains("label_2y") && !j.at("label_2y").is_null()) {
            rec.label_2y = parse_label(j.at("label_2y"), line, "label_2y");
        }
        const auto& lesions = j.at("lesions");
        if (!lesions.is_array() || lesions.empty()) throw schema("patient needs at least one lesion");
        for (const auto& lj : lesions) {
            Lesion l;
            const auto pos = lj.at("pos").get<std::vector<double>>();
            if (pos.size() != 3) throw schema("lesion position must have 3 coordinates");
            for (std::size_t c = 0; c < 3; ++c) {
                if (!(pos[c] >= 0.0 && pos[c] <= 1.0)) throw schema("lesion position outside [0,1]");
                l.position[c] = pos[c];
            }
            const auto region = region_from_string(lj.at("region").get<std::string>());
            if (!region) throw schema("unknown region '" + lj.at("region").get<std::string>() + "'");
            l.region = *region;
            l.features = lj.at("feat").get<std::vector<double>>();
            rec.lesions.push_back(std::move(l));
        }
        if (j.contains("signal")) {
            for (const auto& b : j.at("signal")) rec.signal.push_back(b.get<bool>());
            if (rec.signal.size() != rec.lesions.size()) throw schema("signal length differs from lesion count");
        }
    } catch (const nlohmann::json::exception& e) {
        throw schema(e.what());
    }
    return rec;
}

}  // namespace

Cohort cohort_from_jsonl(std::string_view text) {
    Cohort cohort;
    std::size_t line_no = 0;
    std::size_t feature_dim = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        PatientRecord rec = parse_patient(j, line_no);
        for (const Lesion& l : rec.lesions) {
            if (feature_dim == 0) feature_dim = l.features.size();
            if (l.features.size() != feature_dim || feature_dim == 0) {
                throw SchemaError("line " + std::to_string(line_no) + ": feature dimension " +
                                  std::to_string(l.features.size()) + " differs from cohort dimension " +
                                  std::to_string(feature_dim));
            }
        }
        cohort.push_back(std::move(rec));
    }
    return cohort;
}

Cohort load_cohort(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open cohort file: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return cohort_from_jsonl(ss.str());
}

CohortStats cohort_stats(const Cohort& cohort) {
    if (cohort.empty()) throw InputError("cohort_stats on an empty cohort");
    CohortStats s;
    s.n_patients = cohort.size();
    for (const PatientRecord& rec : cohort) {
        (rec.label_1y == 1 ? s.n_positive : s.n_negative) += 1;
        if (rec.label_2y) ++s.n_with_2y;
        ++s.lesion_count_histogram[rec.lesions.size()];
        for (const Lesion& l : rec.lesions) ++s.region_counts[static_cast<std::size_t>(l.region)];
        s.total_lesions += rec.lesions.size();
    }
    s.positive_fraction = static_cast<double>(s.n_positive) / static_cast<double>(s.n_patients);
    for (std::size_t r = 0; r < 4; ++r) {
        s.region_fractions[r] = static_cast<double>(s.region_counts[r]) / static_cast<double>(s.total_lesions);
    }
    return s;
}

std::string_view to_string(Task t) noexcept { return t == Task::one_year ? "1y" : "2y"; }

std::optional<Task> task_from_string(std::string_view name) noexcept {
    if (name == "1y") return Task::one_year;
    if (name == "2y") return Task::two_year;
    return std::nullopt;
}

TaskView task_view(const Cohort& cohort, Task task) {
    TaskView view;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
        if (task == Task::one_year) {
            view.patient_index.push_back(i);
            view.labels.push_back(cohort[i].label_1y);
        } else if (cohort[i].label_2y) {
            view.patient_index.push_back(i);
            view.labels.push_back(*cohort[i].label_2y);
        }
    }
    if (task == Task::two_year && view.patient_index.empty()) {
        throw SchemaError("cohort has no label_2y values; the 2y task is unavailable");
    }
    return view;
}

std::vector<LesionGraph> build_graphs(const Cohort& cohort, const TaskView& view, const GraphConfig& cfg) {
    std::vector<LesionGraph> graphs;
    graphs.reserve(view.patient_index.size());
    for (std::size_t k = 0; k < view.patient_index.size(); ++k) {
        const PatientRecord& rec = cohort.at(view.patient_index[k]);
        graphs.push_back(build_graph(rec.patient_id, rec.lesions, view.labels[k], cfg));
    }
    return graphs;
}

}  // namespace lgnn
