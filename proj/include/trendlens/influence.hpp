#pragma once

#include "trendlens/corpus.hpp"
#include "trendlens/simdedup.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace trendlens {

struct InfluenceRecord {
    std::string feature;
    /// Raw sales of the products carrying the feature (S_i).
    std::vector<double> product_sales;
    double mean_norm_sales = 0.0;
    std::size_t frequency = 0;
    double norm_frequency = 0.0;
    double score = 0.0;
};

struct InfluenceRanking {
    /// Sorted by score descending, ties by feature ascending.
    std::vector<InfluenceRecord> records;
    double lambda = 0.15;
};

inline constexpr double kDefaultLambda = 0.15;

/// Influence(f) = mean of min-max normalized sales over products carrying f
///              + lambda * min-max normalized frequency of f.
/// Sales are normalized over the whole catalog; frequencies over all features.
InfluenceRanking influence_scores(const Catalog& catalog, const FeatureSet& features,
                                  const std::map<std::string, std::vector<std::string>>& product_features,
                                  double lambda = kDefaultLambda);

using RecordFilter = std::function<bool(const InfluenceRecord&)>;

/// First and last `count` records that pass `filter`, both in ranking order.
std::pair<std::vector<InfluenceRecord>, std::vector<InfluenceRecord>> top_bottom(
    const InfluenceRanking& ranking, std::size_t count, const std::optional<RecordFilter>& filter = std::nullopt);

/// CSV with columns feature,frequency,mean_norm_sales,norm_frequency,score (6 significant digits).
std::string ranking_csv(const InfluenceRanking& ranking);

}  // namespace trendlens
