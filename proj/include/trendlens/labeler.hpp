#pragma once

#include <span>
#include <vector>

namespace trendlens {

/// Sales class in 1..C; a higher class means more sales.
using SalesClass = int;

struct QuantileThresholds {
    /// C - 1 cut points, non-decreasing.
    std::vector<double> cut_points;
    int class_count = 3;
};

inline constexpr int kDefaultClassCount = 3;

/// Cut points at the empirical j/C quantiles (linear interpolation between order statistics).
QuantileThresholds fit_thresholds(std::span<const double> sales, int class_count);

/// 1 + number of cut points strictly below `sale`; a sale equal to a cut point stays in the lower class.
SalesClass assign_class(double sale, const QuantileThresholds& thresholds);

std::vector<SalesClass> assign_classes(std::span<const double> sales, const QuantileThresholds& thresholds);

/// Members per class, index 0 holds class 1.
std::vector<std::size_t> class_counts(std::span<const SalesClass> labels, int class_count);

/// Largest relative deviation of a class count from n / C.
double class_imbalance(std::span<const std::size_t> counts);

inline constexpr double kImbalanceWarning = 0.10;

}  // namespace trendlens
