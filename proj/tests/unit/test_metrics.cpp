#include "doctest.h"

#include <cmath>
#include <vector>

#include "lgnn/error.hpp"
#include "lgnn/metrics.hpp"
#include "support.hpp"

using namespace lgnn;

namespace {

double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != 1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auc examples") {
    CHECK(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
    CHECK(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}) == 0.0);
    CHECK(roc_auc(std::vector<double>{0.5, 0.5, 0.2}, std::vector<int>{1, 0, 0}) == 0.75);
    CHECK(roc_auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1}) == 0.5);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), MetricUndefinedError);
    CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), ShapeError);
}

TEST_CASE("auc equals exhaustive pair counting with ties") {
    Rng rng(81);
    std::uniform_int_distribution<int> level(0, 6), size(2, 60), bit(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        std::vector<double> s(static_cast<std::size_t>(n));
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            s[i] = trial % 2 ? level(rng) / 6.0 : std::uniform_real_distribution<double>(0, 1)(rng);
            y[i] = bit(rng);
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(roc_auc(s, y) == pair_count_auc(s, y));
    }
}

TEST_CASE("auc rank properties") {
    Rng rng(82);
    std::uniform_int_distribution<int> bit(0, 1), level(0, 9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(40), t(40);
        std::vector<int> y(40), flipped(40);
        for (std::size_t i = 0; i < 40; ++i) {
            s[i] = level(rng) / 9.0 - 0.5;
            t[i] = std::exp(3.0 * s[i]) + 7.0;
            y[i] = bit(rng);
        }
        y[0] = 1;
        y[1] = 0;
        for (std::size_t i = 0; i < 40; ++i) flipped[i] = 1 - y[i];
        CHECK(roc_auc(s, y) == roc_auc(t, y));
        CHECK(std::abs(roc_auc(s, y) + roc_auc(s, flipped) - 1.0) <= 1e-12);
    }
}

TEST_CASE("precision recall f1") {
    const std::vector<int> y{1, 0, 1};
    const Prf all = precision_recall_f1(std::vector<double>{0.9, 0.1, 0.7}, y);
    CHECK(all.precision == 1.0);
    CHECK(all.recall == 1.0);
    CHECK(all.f1 == 1.0);
    const Prf none = precision_recall_f1(std::vector<double>{0.1, 0.1, 0.2}, y);
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    const Prf half = precision_recall_f1(std::vector<double>{1.0, 1.0, 0.0}, y);
    CHECK(half.precision == 0.5);
    CHECK(half.recall == 0.5);
    CHECK(half.f1 == 0.5);
    CHECK(precision_recall_f1(std::vector<double>{0.5}, std::vector<int>{1}).precision == 1.0);
    CHECK_THROWS_AS(precision_recall_f1(std::vector<double>{0.4, 0.6}, std::vector<int>{0, 0}), MetricUndefinedError);
}
