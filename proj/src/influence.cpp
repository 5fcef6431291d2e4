#include "trendlens/influence.hpp"

#include "trendlens/error.hpp"
#include "trendlens/util.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace trendlens {

InfluenceRanking influence_scores(const Catalog& catalog, const FeatureSet& features,
                                  const std::map<std::string, std::vector<std::string>>& product_features,
                                  double lambda) {
    if (catalog.empty()) {
        throw ValidationError("influence scores need a non-empty catalog");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ValidationError("lambda must be a finite non-negative number, got " + format_g(lambda));
    }
    const auto sales = catalog.sales();
    const auto norm_sales = minmax_normalize(sales);

    std::unordered_map<std::string, std::size_t> slot;
    std::vector<InfluenceRecord> records(features.features.size());
    std::vector<double> norm_sum(records.size(), 0.0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].feature = features.features[i];
        slot.emplace(features.features[i], i);
    }
    for (std::size_t p = 0; p < catalog.size(); ++p) {
        auto it = product_features.find(catalog.products[p].id);
        if (it == product_features.end()) {
            continue;
        }
        for (const auto& f : it->second) {
            auto s = slot.find(f);
            if (s == slot.end()) {
                throw ValidationError("product '" + catalog.products[p].id + "' carries '" + f +
                                      "', which is not a canonical feature");
            }
            records[s->second].product_sales.push_back(sales[p]);
            norm_sum[s->second] += norm_sales[p];
        }
    }

    std::vector<double> freqs;
    freqs.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& r = records[i];
        if (r.product_sales.empty()) {
            throw ValidationError("feature '" + r.feature + "' does not occur in any product");
        }
        r.frequency = r.product_sales.size();
        r.mean_norm_sales = norm_sum[i] / static_cast<double>(r.frequency);
        freqs.push_back(static_cast<double>(r.frequency));
    }
    if (!records.empty()) {
        const auto norm_freq = minmax_normalize(freqs);
        for (std::size_t i = 0; i < records.size(); ++i) {
            records[i].norm_frequency = norm_freq[i];
            records[i].score = records[i].mean_norm_sales + lambda * norm_freq[i];
        }
    }
    std::sort(records.begin(), records.end(), [](const InfluenceRecord& a, const InfluenceRecord& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.feature < b.feature;
    });
    return {std::move(records), lambda};
}

std::pair<std::vector<InfluenceRecord>, std::vector<InfluenceRecord>> top_bottom(
    const InfluenceRanking& ranking, std::size_t count, const std::optional<RecordFilter>& filter) {
    std::vector<const InfluenceRecord*> kept;
    for (const auto& r : ranking.records) {
        if (!filter || (*filter)(r)) {
            kept.push_back(&r);
        }
    }
    if (count > kept.size()) {
        throw ValidationError("requested " + std::to_string(count) + " features per side but only " +
                              std::to_string(kept.size()) + " pass the filter (short by " +
                              std::to_string(count - kept.size()) + ")");
    }
    std::vector<InfluenceRecord> top;
    std::vector<InfluenceRecord> bottom;
    for (std::size_t i = 0; i < count; ++i) {
        top.push_back(*kept[i]);
        bottom.push_back(*kept[kept.size() - count + i]);
    }
    return {std::move(top), std::move(bottom)};
}

std::string ranking_csv(const InfluenceRanking& ranking) {
    std::string out = "feature,frequency,mean_norm_sales,norm_frequency,score\n";
    for (const auto& r : ranking.records) {
        out += csv_field(r.feature);
        out += ',' + std::to_string(r.frequency);
        out += ',' + format_g(r.mean_norm_sales);
        out += ',' + format_g(r.norm_frequency);
        out += ',' + format_g(r.score);
        out += '\n';
    }
    return out;
}

}  // namespace trendlens
