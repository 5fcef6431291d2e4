#include "trendlens/labeler.hpp"

#include "trendlens/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace trendlens {

QuantileThresholds fit_thresholds(std::span<const double> sales, int class_count) {
    if (class_count < 3 || class_count > 5) {
        throw ValidationError("class count must be 3, 4 or 5, got " + std::to_string(class_count));
    }
    if (sales.size() < static_cast<std::size_t>(class_count)) {
        throw ValidationError("need at least " + std::to_string(class_count) + " sales values to fit " +
                              std::to_string(class_count) + " classes, got " + std::to_string(sales.size()));
    }
    std::vector<double> sorted(sales.begin(), sales.end());
    std::sort(sorted.begin(), sorted.end());
    const double last = static_cast<double>(sorted.size() - 1);

    QuantileThresholds t;
    t.class_count = class_count;
    for (int j = 1; j < class_count; ++j) {
        const double h = last * static_cast<double>(j) / static_cast<double>(class_count);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = h - static_cast<double>(lo);
        t.cut_points.push_back(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
    }
    return t;
}

SalesClass assign_class(double sale, const QuantileThresholds& thresholds) {
    const auto below = std::lower_bound(thresholds.cut_points.begin(), thresholds.cut_points.end(), sale) -
                       thresholds.cut_points.begin();
    return 1 + static_cast<SalesClass>(below);
}

std::vector<SalesClass> assign_classes(std::span<const double> sales, const QuantileThresholds& thresholds) {
    std::vector<SalesClass> out;
    out.reserve(sales.size());
    for (double s : sales) {
        out.push_back(assign_class(s, thresholds));
    }
    return out;
}

std::vector<std::size_t> class_counts(std::span<const SalesClass> labels, int class_count) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(class_count), 0);
    for (auto label : labels) {
        if (label < 1 || label > class_count) {
            throw ValidationError("label " + std::to_string(label) + " outside 1.." + std::to_string(class_count));
        }
        ++counts[static_cast<std::size_t>(label - 1)];
    }
    return counts;
}

double class_imbalance(std::span<const std::size_t> counts) {
    if (counts.empty()) {
        return 0.0;
    }
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    if (total == 0.0) {
        return 0.0;
    }
    const double expected = total / static_cast<double>(counts.size());
    double worst = 0.0;
    for (auto c : counts) {
        worst = std::max(worst, std::abs(static_cast<double>(c) - expected) / expected);
    }
    return worst;
}

}  // namespace trendlens
