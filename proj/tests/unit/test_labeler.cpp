#include "trendlens/error.hpp"
#include "trendlens/labeler.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace trendlens;

TEST_CASE("sales 1..9 split into exact thirds") {
    const std::vector<double> sales{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const auto t = fit_thresholds(sales, 3);
    CHECK(t.cut_points.size() == 2);
    CHECK(t.cut_points[0] == doctest::Approx(3 + 2.0 / 3));
    CHECK(t.cut_points[1] == doctest::Approx(6 + 1.0 / 3));
    CHECK(assign_classes(sales, t) == std::vector<SalesClass>{1, 1, 1, 2, 2, 2, 3, 3, 3});
}

TEST_CASE("boundary values stay in the lower class") {
    const QuantileThresholds t{{10.0, 20.0}, 3};
    CHECK(assign_class(-1.0, t) == 1);
    CHECK(assign_class(10.0, t) == 1);
    CHECK(assign_class(10.5, t) == 2);
    CHECK(assign_class(20.0, t) == 2);
    CHECK(assign_class(1e9, t) == 3);
}

TEST_CASE("balanced classes for distinct sales when C divides n") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1000);
    for (int c : {3, 4, 5}) {
        for (std::size_t k : {1u, 2u, 7u, 40u}) {
            std::vector<double> sales(k * static_cast<std::size_t>(c));
            for (auto& s : sales) {
                s = u(rng);
            }
            const auto labels = assign_classes(sales, fit_thresholds(sales, c));
            const auto counts = class_counts(labels, c);
            CHECK(std::all_of(counts.begin(), counts.end(), [&](std::size_t n) { return n == k; }));
            CHECK(class_imbalance(counts) == 0.0);

            // Oracle: rank r in sorted order belongs to class 1 + r * C / n.
            std::vector<std::size_t> order(sales.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sales[a] < sales[b]; });
            for (std::size_t r = 0; r < order.size(); ++r) {
                CHECK(labels[order[r]] == 1 + static_cast<SalesClass>(r * static_cast<std::size_t>(c) / sales.size()));
            }
        }
    }
}

TEST_CASE("labels match a sort-and-bucket brute force on arbitrary sales") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> u(0, 50);
    std::vector<double> sales(101);
    for (auto& s : sales) {
        s = u(rng);
    }
    const auto t = fit_thresholds(sales, 4);
    auto sorted = sales;
    std::sort(sorted.begin(), sorted.end());
    for (double s : sales) {
        // Independent quantile recomputation via linear interpolation of order statistics.
        int expected = 1;
        for (int j = 1; j < 4; ++j) {
            const double h = 100.0 * j / 4.0;
            const double q = sorted[static_cast<std::size_t>(h)] +
                             (h - std::floor(h)) * (sorted[std::min<std::size_t>(100, static_cast<std::size_t>(h) + 1)] -
                                                    sorted[static_cast<std::size_t>(h)]);
            expected += s > q;
        }
        CHECK(assign_class(s, t) == expected);
    }
}

TEST_CASE("heavy ties produce a visible imbalance") {
    std::vector<double> sales(30, 5.0);
    sales[29] = 6.0;
    const auto labels = assign_classes(sales, fit_thresholds(sales, 3));
    CHECK(class_imbalance(class_counts(labels, 3)) > kImbalanceWarning);
}

TEST_CASE("invalid configurations") {
    const std::vector<double> sales{1, 2, 3, 4, 5, 6};
    CHECK_THROWS_AS(fit_thresholds(sales, 2), ValidationError);
    CHECK_THROWS_AS(fit_thresholds(sales, 6), ValidationError);
    CHECK_THROWS_AS(fit_thresholds(std::vector<double>{1, 2}, 3), ValidationError);
    CHECK_THROWS_AS(class_counts(std::vector<SalesClass>{0}, 3), ValidationError);
}
