#include "trendlens/error.hpp"
#include "trendlens/influence.hpp"
#include "trendlens/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace trendlens;

namespace {

struct Fixture {
    Catalog catalog;
    FeatureSet features;
    std::map<std::string, std::vector<std::string>> product_features;
};

Fixture three_products() {
    Fixture f;
    f.catalog = make_catalog({Product{"1", "a", "", {}, {}, 10}, Product{"2", "b", "", {}, {}, 20},
                              Product{"3", "a", "", {}, {}, 30}});
    f.features.features = {"a", "b"};
    f.features.alias_map = {{"a", "a"}, {"b", "b"}};
    f.product_features = {{"1", {"a"}}, {"2", {"b"}}, {"3", {"a"}}};
    return f;
}

const InfluenceRecord& find(const InfluenceRanking& r, const std::string& name) {
    for (const auto& rec : r.records) {
        if (rec.feature == name) {
            return rec;
        }
    }
    throw std::runtime_error("no record " + name);
}

}  // namespace

TEST_CASE("hand-evaluated three-product example") {
    const auto f = three_products();
    const auto r = influence_scores(f.catalog, f.features, f.product_features, 0.15);
    CHECK(find(r, "a").score == doctest::Approx(0.65).epsilon(1e-12));
    CHECK(find(r, "b").score == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.records.front().feature == "a");
    CHECK(find(r, "a").product_sales == std::vector<double>{10, 30});

    const auto r0 = influence_scores(f.catalog, f.features, f.product_features, 0.0);
    CHECK(find(r0, "a").score == doctest::Approx(0.5));
    CHECK(find(r0, "b").score == doctest::Approx(0.5));
    // Equal scores rank by name.
    CHECK(r0.records[0].feature == "a");
}

TEST_CASE("a feature on every product has degenerate frequency") {
    auto catalog = make_catalog({Product{"1", "x", "", {}, {}, 1}, Product{"2", "x", "", {}, {}, 5},
                                 Product{"3", "x", "", {}, {}, 3}});
    FeatureSet fs{{"x"}, {{"x", "x"}}};
    const auto r = influence_scores(catalog, fs, {{"1", {"x"}}, {"2", {"x"}}, {"3", {"x"}}}, 0.15);
    CHECK(r.records[0].mean_norm_sales == doctest::Approx((0.0 + 1.0 + 0.5) / 3));
    CHECK(r.records[0].norm_frequency == 0.0);
}

TEST_CASE("invalid inputs") {
    auto f = three_products();
    CHECK_THROWS_AS(influence_scores(f.catalog, f.features, f.product_features, -0.1), ValidationError);
    CHECK_THROWS_AS(influence_scores(f.catalog, f.features, f.product_features, NAN), ValidationError);
    f.features.features.push_back("ghost");
    CHECK_THROWS_AS(influence_scores(f.catalog, f.features, f.product_features), ValidationError);
    f = three_products();
    f.product_features["2"] = {"unknown"};
    CHECK_THROWS_AS(influence_scores(f.catalog, f.features, f.product_features), ValidationError);
}

TEST_CASE("top_bottom") {
    auto catalog = make_catalog({Product{"1", "", "", {}, {}, 0}, Product{"2", "", "", {}, {}, 5},
                                 Product{"3", "", "", {}, {}, 10}});
    FeatureSet fs{{"hi", "lo", "mid"}, {}};
    const auto r = influence_scores(catalog, fs, {{"1", {"lo"}}, {"2", {"mid"}}, {"3", {"hi"}}}, 0.0);
    auto [top, bottom] = top_bottom(r, 1);
    CHECK(top.at(0).feature == "hi");
    CHECK(bottom.at(0).feature == "lo");

    RecordFilter skip_hi = [](const InfluenceRecord& rec) { return rec.feature != "hi"; };
    auto [top2, bottom2] = top_bottom(r, 1, skip_hi);
    CHECK(top2.at(0).feature == "mid");

    auto [all_top, all_bottom] = top_bottom(r, 3);
    CHECK(all_bottom.size() == 3);
    CHECK(all_bottom.front().feature == "hi");
    CHECK_THROWS_AS(top_bottom(r, 4), ValidationError);
}

TEST_CASE("ranking csv") {
    const auto f = three_products();
    const auto csv = ranking_csv(influence_scores(f.catalog, f.features, f.product_features, 0.15));
    CHECK(csv == "feature,frequency,mean_norm_sales,norm_frequency,score\na,2,0.5,1,0.65\nb,1,0.5,0,0.5\n");
}

TEST_CASE("zero noise with equal frequencies ranks features by planted effect") {
    SynthSpec spec = default_spec(400, 4);
    spec.noise_sigma = 0.0;
    spec.balanced = true;
    spec.min_features = spec.max_features = 1;
    for (auto& [attr, levels] : spec.categoricals) {
        for (auto& l : levels) {
            l.effect = 0.0;
        }
    }
    for (auto& feature : spec.features) {
        feature.variants = {feature.canonical};
    }
    const auto catalog = generate(spec);
    const auto cf = canonicalize(catalog, cluster_synonyms(build_universe(catalog), {}));
    const auto r = influence_scores(catalog, cf.feature_set, cf.product_features, 0.15);
    REQUIRE(r.records.size() == spec.features.size());
    // Effects decrease along the vocabulary, so the ranking must follow it.
    double previous = INFINITY;
    for (const auto& rec : r.records) {
        double effect = NAN;
        for (const auto& pf : spec.features) {
            if (pf.canonical == rec.feature) {
                effect = pf.effect;
            }
        }
        CHECK(effect < previous);
        previous = effect;
    }
}
