#include "doctest.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lgnn/cohort.hpp"
#include "lgnn/error.hpp"

using namespace lgnn;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "lgnn_unit";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string replace_line(const std::string& text, std::size_t index, const std::string& line) {
    std::istringstream is(text);
    std::ostringstream os;
    std::string cur;
    for (std::size_t i = 0; std::getline(is, cur); ++i) os << (i == index ? line : cur) << '\n';
    return os.str();
}

}  // namespace

TEST_CASE("default cohort statistics") {
    const Cohort c = generate_cohort(CohortSpec{});
    REQUIRE(c.size() == 430);
    const CohortStats s = cohort_stats(c);
    CHECK(s.n_positive == 303);
    CHECK(s.n_negative == 127);
    CHECK(s.positive_fraction == doctest::Approx(303.0 / 430.0));
    CHECK(s.n_with_2y == 347);
    double total = 0.0;
    for (double f : s.region_fractions) total += f;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(c.front().patient_id == "P0001");
}

TEST_CASE("generated records follow the spec") {
    CohortSpec spec;
    spec.n_patients = 120;
    spec.seed = 4;
    const Cohort c = generate_cohort(spec);
    for (const PatientRecord& p : c) {
        CHECK(p.lesions.size() >= 2);
        CHECK(p.lesions.size() <= 40);
        REQUIRE(p.signal.size() == p.lesions.size());
        std::size_t signal = 0;
        for (bool b : p.signal) signal += b ? 1 : 0;
        if (p.label_1y == 1) {
            CHECK(signal == static_cast<std::size_t>(std::ceil(0.5 * static_cast<double>(p.lesions.size()))));
        } else {
            CHECK(signal == 0);
        }
        for (const Lesion& l : p.lesions) {
            REQUIRE(l.features.size() == 16);
            for (int k = 0; k < 3; ++k) {
                CHECK(l.position[k] >= 0.0);
                CHECK(l.position[k] <= 1.0);
                CHECK(l.features[13 + k] == l.position[k]);
            }
            CHECK(l.region == nearest_region(l.position));
        }
    }
}

TEST_CASE("spec overrides and validation") {
    CohortSpec spec;
    apply_override(spec, "n_patients=10");
    apply_override(spec, "positive_fraction=1");
    apply_override(spec, "region_priors=1,0,0,0");
    CHECK(spec.n_patients == 10);
    for (const PatientRecord& p : generate_cohort(spec)) CHECK(p.label_1y == 1);
    CHECK_THROWS_AS(apply_override(spec, "bogus=1"), ParameterError);
    CHECK_THROWS_AS(apply_override(spec, "n_patients"), ParameterError);
    CHECK_THROWS_AS(apply_override(spec, "region_priors=1,2"), ParameterError);
    CohortSpec bad;
    bad.feature_dim = 3;
    CHECK_THROWS_AS(generate_cohort(bad), ParameterError);
    bad = {};
    bad.signal_fraction = 0.0;
    CHECK_THROWS_AS(generate_cohort(bad), ParameterError);
}

TEST_CASE("generation is deterministic and round-trips") {
    CohortSpec spec;
    spec.n_patients = 50;
    spec.seed = 12;
    const Cohort a = generate_cohort(spec);
    CHECK(cohort_to_jsonl(a) == cohort_to_jsonl(generate_cohort(spec)));
    spec.seed = 13;
    CHECK(cohort_to_jsonl(a) != cohort_to_jsonl(generate_cohort(spec)));

    const auto path = temp_file("roundtrip.jsonl");
    save_cohort(a, path);
    CHECK(load_cohort(path) == a);
    CHECK(cohort_from_jsonl(cohort_to_jsonl(a)) == a);
}

TEST_CASE("schema and parse errors name the line") {
    CohortSpec spec;
    spec.n_patients = 5;
    const std::string text = cohort_to_jsonl(generate_cohort(spec));
    try {
        cohort_from_jsonl(replace_line(text, 2, "{\"id\": "));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    const std::string short_feat =
        R"({"id":"X","label_1y":1,"label_2y":null,"lesions":[{"pos":[0.1,0.2,0.3],"region":"periventricular","feat":[1,2,3,4]}]})";
    try {
        cohort_from_jsonl(replace_line(text, 3, short_feat));
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
    CHECK_THROWS_AS(load_cohort(temp_file("does_not_exist.jsonl")), IoError);
}

TEST_CASE("default cohort file loads quickly") {
    const auto path = temp_file("default.jsonl");
    save_cohort(generate_cohort(CohortSpec{}), path);
    const auto t0 = std::chrono::steady_clock::now();
    const Cohort c = load_cohort(path);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(c.size() == 430);
    CHECK(seconds < 1.0);
}

TEST_CASE("single patient stats") {
    CohortSpec spec;
    spec.n_patients = 1;
    const CohortStats s = cohort_stats(generate_cohort(spec));
    CHECK(s.lesion_count_histogram.size() == 1);
    CHECK_THROWS_AS(cohort_stats(Cohort{}), InputError);
}

TEST_CASE("task views") {
    const Cohort c = generate_cohort(CohortSpec{});
    const TaskView one = task_view(c, Task::one_year);
    CHECK(one.labels.size() == 430);
    const TaskView two = task_view(c, Task::two_year);
    CHECK(two.labels.size() == 347);
    std::size_t flips = 0;
    for (std::size_t k = 0; k < two.labels.size(); ++k) flips += two.labels[k] != c[two.patient_index[k]].label_1y;
    CHECK(flips > 0);
    CHECK(flips < 80);

    Cohort no2y = c;
    for (auto& p : no2y) p.label_2y.reset();
    CHECK_THROWS_AS(task_view(no2y, Task::two_year), SchemaError);
    CHECK(task_from_string("2y") == Task::two_year);

    GraphConfig gc;
    const auto graphs = build_graphs(c, one, gc);
    CHECK(graphs.size() == 430);
    CHECK(graphs[0].patient_id == c[0].patient_id);
    CHECK(graphs[0].label == c[0].label_1y);
}
