#include "trendlens/evalx.hpp"

#include "trendlens/captions.hpp"
#include "trendlens/error.hpp"
#include "trendlens/util.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace trendlens {

std::vector<Triple> select_triples(const Catalog& catalog, const std::map<std::string, SalesClass>& labels,
                                   std::size_t m, std::uint64_t seed, std::string_view type_attribute) {
    if (m == 0) {
        throw ValidationError("number of triples must be positive");
    }
    // type -> class (1..3) -> product ids in catalog order
    std::map<std::string, std::array<std::vector<std::string>, 3>> by_type;
    for (const auto& p : catalog.products) {
        auto type = p.categoricals.find(std::string(type_attribute));
        auto label = labels.find(p.id);
        if (type == p.categoricals.end() || label == labels.end()) {
            continue;
        }
        if (label->second >= 1 && label->second <= 3) {
            by_type[type->second][static_cast<std::size_t>(label->second - 1)].push_back(p.id);
        }
    }
    std::vector<std::string> eligible;
    for (const auto& [type, members] : by_type) {
        if (std::all_of(members.begin(), members.end(), [](const auto& v) { return !v.empty(); })) {
            eligible.push_back(type);
        }
    }
    if (eligible.size() < m) {
        throw ValidationError("need " + std::to_string(m) + " product types with one product in each of classes " +
                              "1, 2 and 3, found " + std::to_string(eligible.size()));
    }
    std::mt19937_64 rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    std::vector<Triple> out;
    for (std::size_t i = 0; i < m; ++i) {
        Triple t;
        t.product_type = eligible[i];
        const auto& members = by_type[eligible[i]];
        for (std::size_t c = 0; c < 3; ++c) {
            std::uniform_int_distribution<std::size_t> pick(0, members[c].size() - 1);
            t.ids[c] = members[c][pick(rng)];
            t.truth[c] = static_cast<SalesClass>(c + 1);
        }
        out.push_back(std::move(t));
    }
    return out;
}

TripleResult kendall_tau_triple(const std::array<double, 3>& predicted, const std::array<SalesClass, 3>& truth) {
    if (truth[0] == truth[1] || truth[0] == truth[2] || truth[1] == truth[2]) {
        throw ValidationError("triple truth labels must be distinct");
    }
    TripleResult r;
    r.predicted = predicted;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
            const double dp = predicted[i] - predicted[j];
            const int dt = truth[i] - truth[j];
            if (dp == 0.0) {
                continue;
            }
            if ((dp > 0) == (dt > 0)) {
                ++r.concordant;
            } else {
                ++r.discordant;
            }
        }
    }
    r.tau = static_cast<double>(r.concordant - r.discordant) / 3.0;
    return r;
}

TauSummary kendall_tau_total(const std::vector<TripleResult>& results) {
    if (results.empty()) {
        throw ValidationError("no triple results to aggregate");
    }
    TauSummary s;
    s.m = results.size();
    for (const auto& r : results) {
        s.sum += r.tau;
    }
    s.mean = s.sum / static_cast<double>(s.m);
    return s;
}

std::size_t correct_triple_count(const std::vector<TripleResult>& results) {
    return static_cast<std::size_t>(
        std::count_if(results.begin(), results.end(), [](const TripleResult& r) { return r.concordant == 3; }));
}

std::string_view to_string(Polarity polarity) noexcept { return polarity == Polarity::good ? "good" : "bad"; }

std::string_view to_string(Direction direction) noexcept {
    switch (direction) {
    case Direction::original_higher:
        return "original";
    case Direction::modified_higher:
        return "modified";
    case Direction::tie:
        return "tie";
    }
    return "tie";
}

Direction direction(const AblationCase& c) noexcept {
    if (c.original_score > c.modified_score) {
        return Direction::original_higher;
    }
    if (c.modified_score > c.original_score) {
        return Direction::modified_higher;
    }
    return Direction::tie;
}

bool matches_expectation(const AblationCase& c) noexcept {
    const auto d = direction(c);
    return c.polarity == Polarity::good ? d == Direction::original_higher : d == Direction::modified_higher;
}

Product remove_feature(const Product& product, const std::string& feature,
                       const std::map<std::string, std::string>& alias_map,
                       const std::optional<std::string>& alternate_image_ref) {
    Product out = product;
    std::string caption;
    std::size_t start = 0;
    const auto& raw = product.caption;
    for (std::size_t i = 0; i <= raw.size(); ++i) {
        if (i < raw.size() && raw[i] != ',' && raw[i] != ';' && raw[i] != '.') {
            continue;
        }
        const auto piece = std::string_view(raw).substr(start, i - start);
        start = i + 1;
        const auto cleaned = clean_caption(piece);
        if (cleaned.empty()) {
            continue;
        }
        auto it = alias_map.find(cleaned.front());
        const auto& canonical = it == alias_map.end() ? cleaned.front() : it->second;
        if (canonical == feature) {
            continue;
        }
        const auto first = piece.find_first_not_of(" \t\r\n");
        const auto last = piece.find_last_not_of(" \t\r\n");
        if (!caption.empty()) {
            caption += ", ";
        }
        caption += piece.substr(first, last - first + 1);
    }
    out.caption = std::move(caption);
    if (alternate_image_ref) {
        out.image_ref = *alternate_image_ref;
    }
    return out;
}

std::vector<AblationCase> plan_ablation(const Catalog& catalog, const CanonicalFeatures& canonical,
                                        const std::vector<InfluenceRecord>& records, Polarity polarity,
                                        std::size_t n_cases, std::uint64_t seed) {
    std::map<std::string, std::vector<const Product*>> carriers;
    for (const auto& p : catalog.products) {
        auto it = canonical.product_features.find(p.id);
        if (it == canonical.product_features.end()) {
            continue;
        }
        for (const auto& f : it->second) {
            carriers[f].push_back(&p);
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<std::vector<const Product*>> pools;
    std::size_t longest = 0;
    for (const auto& r : records) {
        auto pool = carriers[r.feature];
        std::shuffle(pool.begin(), pool.end(), rng);
        longest = std::max(longest, pool.size());
        pools.push_back(std::move(pool));
    }
    std::vector<AblationCase> cases;
    for (std::size_t round = 0; round < longest && cases.size() < n_cases; ++round) {
        for (std::size_t i = 0; i < records.size() && cases.size() < n_cases; ++i) {
            if (round >= pools[i].size()) {
                continue;
            }
            AblationCase c;
            c.feature = records[i].feature;
            c.polarity = polarity;
            c.feature_score = records[i].score;
            c.original = *pools[i][round];
            c.modified = remove_feature(c.original, c.feature, canonical.feature_set.alias_map);
            cases.push_back(std::move(c));
        }
    }
    return cases;
}

std::vector<AblationCase> run_ablation(std::vector<AblationCase> cases, const ForestModel& model,
                                       EmbeddingProvider& provider, const FeatureEncoder& encoder) {
    for (auto& c : cases) {
        try {
            c.original_score = prediction_score(predict_proba(model, encoder.encode(c.original, provider)));
            c.modified_score = prediction_score(predict_proba(model, encoder.encode(c.modified, provider)));
        } catch (const ValidationError& e) {
            throw ValidationError("ablation of '" + c.feature + "' on product '" + c.original.id + "': " + e.what());
        }
    }
    return cases;
}

std::string ablation_csv(const std::vector<AblationCase>& cases) {
    std::string out = "remove,feature,feature_score,original_s,modified_s,direction,matches\n";
    for (const auto& c : cases) {
        out += std::string(to_string(c.polarity));
        out += ',' + csv_field(c.feature);
        out += ',' + format_g(c.feature_score, 3);
        out += ',' + format_g(c.original_score, 4);
        out += ',' + format_g(c.modified_score, 4);
        out += ',' + std::string(to_string(direction(c)));
        out += matches_expectation(c) ? ",yes\n" : ",no\n";
    }
    return out;
}

std::string triples_csv(const std::vector<Triple>& triples, const std::vector<TripleResult>& results) {
    std::string out = "triple,product_type,id_1,id_2,id_3,truth_1,truth_2,truth_3,s_1,s_2,s_3,concordant,discordant,tau\n";
    for (std::size_t i = 0; i < triples.size() && i < results.size(); ++i) {
        const auto& t = triples[i];
        const auto& r = results[i];
        out += std::to_string(i + 1) + ',' + csv_field(t.product_type);
        for (const auto& id : t.ids) {
            out += ',' + csv_field(id);
        }
        for (auto truth : t.truth) {
            out += ',' + std::to_string(truth);
        }
        for (double s : r.predicted) {
            out += ',' + format_g(s, 6);
        }
        out += ',' + std::to_string(r.concordant) + ',' + std::to_string(r.discordant) + ',' + format_g(r.tau, 6) +
               '\n';
    }
    if (!results.empty()) {
        const auto summary = kendall_tau_total(results);
        out += "total_sum,,,,,,,,,,,,," + format_g(summary.sum, 6) + '\n';
        out += "mean,,,,,,,,,,,,," + format_g(summary.mean, 6) + '\n';
        out += "correct_count,,,,,,,,,,,,," + std::to_string(correct_triple_count(results)) + '\n';
    }
    return out;
}

}  // namespace trendlens
