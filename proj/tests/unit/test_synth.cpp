#include "trendlens/error.hpp"
#include "trendlens/simdedup.hpp"
#include "trendlens/synth.hpp"

#include <doctest.h>

using namespace trendlens;

TEST_CASE("same seed gives a byte-identical catalog") {
    const auto a = serialize_catalog_jsonl(generate(default_spec(150, 4)));
    CHECK(a == serialize_catalog_jsonl(generate(default_spec(150, 4))));
    CHECK(a != serialize_catalog_jsonl(generate(default_spec(150, 5))));
}

TEST_CASE("zero noise single positive feature") {
    SynthSpec spec;
    spec.n_products = 200;
    spec.noise_sigma = 0.0;
    spec.min_features = 1;
    spec.max_features = 2;
    spec.features = {{"folded cuffs", {"folded cuffs"}, 25.0},
                     {"logo print", {"logo print"}, 0.0},
                     {"lace trim", {"lace trim"}, 0.0}};
    spec.categoricals["product_type"] = {{"dress", 0.0}, {"coat", 0.0}};
    const auto catalog = generate(spec);
    double min_with = 1e300;
    double max_without = -1e300;
    for (const auto& p : catalog.products) {
        const auto phrases = clean_caption(p.caption);
        const bool has = std::find(phrases.begin(), phrases.end(), "folded cuffs") != phrases.end();
        (has ? min_with : max_without) = has ? std::min(min_with, p.sales) : std::max(max_without, p.sales);
    }
    CHECK(min_with > max_without);
}

TEST_CASE("expected sales and clipping") {
    SynthSpec spec;
    spec.n_products = 50;
    spec.noise_sigma = 0.0;
    spec.base_sales = 10.0;
    spec.min_features = spec.max_features = 1;
    spec.features = {{"frayed hem", {"frayed hem"}, -30.0}, {"tie belt", {"tie belt"}, 5.0}};
    spec.categoricals["product_type"] = {{"dress", 1.0}};
    const auto catalog = generate(spec);
    for (const auto& p : catalog.products) {
        CHECK(p.sales >= 0.0);
        const double mu = expected_sales(spec, p);
        CHECK(p.sales == doctest::Approx(std::max(0.0, mu)));
    }
    const auto t = fit_thresholds(catalog.sales(), 3);
    CHECK(bayes_accuracy(spec, catalog, t) == 1.0);
}

TEST_CASE("generated catalogs expose every planted variant and recover the groups") {
    const auto spec = default_spec(500, 6);
    const auto catalog = generate(spec);
    CHECK(catalog.size() == 500);
    CHECK(catalog.schema.categorical_levels.size() == 22);
    CHECK(catalog.schema.numeric_names.size() == 13);
    const auto universe = build_universe(catalog);
    std::size_t planted_groups = 0;
    for (const auto& f : spec.features) {
        ++planted_groups;
        for (const auto& v : f.variants) {
            CHECK(universe.frequency.contains(v));
        }
    }
    const auto groups = cluster_synonyms(universe, {});
    CHECK(groups.size() == planted_groups);
}

TEST_CASE("bayes accuracy bounds") {
    const auto spec = learnability_spec(1000, 1);
    const auto catalog = generate(spec);
    const auto t = fit_thresholds(catalog.sales(), 3);
    const double b = bayes_accuracy(spec, catalog, t);
    CHECK(b > 1.0 / 3);
    CHECK(b <= 1.0);
}

TEST_CASE("balanced assignment equalizes frequencies") {
    auto spec = default_spec(400, 2);
    spec.balanced = true;
    spec.min_features = spec.max_features = 3;
    const auto catalog = generate(spec);
    const auto universe = build_universe(catalog);
    std::map<std::string, std::size_t> per_feature;
    for (const auto& f : spec.features) {
        for (const auto& v : f.variants) {
            if (universe.frequency.contains(v)) {
                per_feature[f.canonical] += universe.frequency.at(v);
            }
        }
    }
    for (const auto& [name, count] : per_feature) {
        CHECK(count == 30);
    }
    for (const auto& p : catalog.products) {
        CHECK(clean_caption(p.caption).size() == 3);
    }
}

TEST_CASE("synthetic spec validation and json round trip") {
    auto spec = default_spec(100, 3);
    const auto back = SynthSpec::from_json(nlohmann::json::parse(spec.to_json().dump()));
    CHECK(serialize_catalog_jsonl(generate(back)) == serialize_catalog_jsonl(generate(spec)));

    auto bad = spec;
    bad.n_products = 5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = spec;
    bad.features[0].effect = INFINITY;
    CHECK_THROWS_AS(generate(bad), ValidationError);
    bad = spec;
    bad.features[0].variants = {"something else"};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = spec;
    bad.max_features = 100;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = spec;
    bad.features[1].variants.push_back(bad.features[0].canonical);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    CHECK_THROWS_AS(SynthSpec::from_json(nlohmann::json::parse(R"({"features":[{"effect":1}]})")), ValidationError);
    CHECK_THROWS_AS(preset_spec("nope", 100, 1), ValidationError);
}
