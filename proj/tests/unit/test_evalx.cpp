#include "trendlens/error.hpp"
#include "trendlens/evalx.hpp"
#include "trendlens/synth.hpp"

#include <doctest.h>

#include <random>

using namespace trendlens;

namespace {

Product product(std::string id, std::string type, double sales, std::string caption = "x") {
    Product p;
    p.id = std::move(id);
    p.caption = std::move(caption);
    p.categoricals["product_type"] = std::move(type);
    p.sales = sales;
    return p;
}

}  // namespace

TEST_CASE("kendall tau on a triple") {
    const std::array<SalesClass, 3> truth{1, 2, 3};
    auto perfect = kendall_tau_triple({1.1, 2.0, 2.9}, truth);
    CHECK(perfect.concordant == 3);
    CHECK(perfect.discordant == 0);
    CHECK(perfect.tau == 1.0);
    CHECK(kendall_tau_triple({2.9, 2.0, 1.1}, truth).tau == -1.0);
    auto swap = kendall_tau_triple({2.0, 1.1, 2.9}, truth);
    CHECK(swap.concordant == 2);
    CHECK(swap.discordant == 1);
    CHECK(swap.tau == doctest::Approx(1.0 / 3));
    // Tied predictions count as neither.
    auto tied = kendall_tau_triple({2.0, 2.0, 2.9}, truth);
    CHECK(tied.concordant == 2);
    CHECK(tied.discordant == 0);
    CHECK(tied.tau == doctest::Approx(2.0 / 3));
    CHECK_THROWS_AS(kendall_tau_triple({1, 2, 3}, {1, 1, 3}), ValidationError);
}

TEST_CASE("aggregation and correct counts") {
    const std::array<SalesClass, 3> truth{1, 2, 3};
    std::vector<TripleResult> all_perfect(20, kendall_tau_triple({1, 2, 3}, truth));
    const auto s = kendall_tau_total(all_perfect);
    CHECK(s.sum == 20.0);
    CHECK(s.mean == 1.0);
    CHECK(correct_triple_count(all_perfect) == 20);
    std::vector<TripleResult> reversed(5, kendall_tau_triple({3, 2, 1}, truth));
    CHECK(correct_triple_count(reversed) == 0);
    const std::vector<TripleResult> mixed{kendall_tau_triple({1, 2, 3}, truth), kendall_tau_triple({2, 1, 3}, truth),
                                          kendall_tau_triple({1, 2, 3}, truth)};
    CHECK(correct_triple_count(mixed) == 2);
    CHECK(kendall_tau_total(mixed).sum == doctest::Approx(2 + 1.0 / 3));
    CHECK_THROWS_AS(kendall_tau_total({}), ValidationError);
}

TEST_CASE("random scores give mean tau near zero") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(1.0, 3.0);
    std::vector<TripleResult> results;
    std::array<SalesClass, 3> truth{1, 2, 3};
    for (int i = 0; i < 4000; ++i) {
        std::shuffle(truth.begin(), truth.end(), rng);
        results.push_back(kendall_tau_triple({u(rng), u(rng), u(rng)}, truth));
    }
    CHECK(std::abs(kendall_tau_total(results).mean) <= 0.05);
}

TEST_CASE("triple selection") {
    std::vector<Product> ps{product("a1", "dress", 1), product("a2", "dress", 5), product("a3", "dress", 9),
                            product("b1", "coat", 1), product("b2", "coat", 2)};
    const auto catalog = make_catalog(ps);
    const std::map<std::string, SalesClass> labels{{"a1", 1}, {"a2", 2}, {"a3", 3}, {"b1", 1}, {"b2", 2}};
    const auto t = select_triples(catalog, labels, 1, 3);
    REQUIRE(t.size() == 1);
    CHECK(t[0].product_type == "dress");
    CHECK(t[0].ids == std::array<std::string, 3>{"a1", "a2", "a3"});
    CHECK(t[0].truth == std::array<SalesClass, 3>{1, 2, 3});
    try {
        select_triples(catalog, labels, 2, 3);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("found 1") != std::string::npos);
    }

    const auto rich = generate(default_spec(600, 2));
    const auto thresholds = fit_thresholds(rich.sales(), 3);
    std::map<std::string, SalesClass> rich_labels;
    for (const auto& p : rich.products) {
        rich_labels[p.id] = assign_class(p.sales, thresholds);
    }
    const auto s1 = select_triples(rich, rich_labels, 20, 1);
    const auto s2 = select_triples(rich, rich_labels, 20, 2);
    CHECK(s1.size() == 20);
    bool differ = false;
    for (std::size_t i = 0; i < 20; ++i) {
        differ = differ || s1[i].ids != s2[i].ids;
    }
    CHECK(differ);
    std::map<std::string, const Product*> by_id;
    for (const auto& p : rich.products) {
        by_id[p.id] = &p;
    }
    std::set<std::string> types;
    for (const auto& t1 : s1) {
        CHECK(types.insert(t1.product_type).second);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(rich_labels.at(t1.ids[k]) == static_cast<SalesClass>(k + 1));
            CHECK(by_id.at(t1.ids[k])->categoricals.at("product_type") == t1.product_type);
        }
    }
}

TEST_CASE("feature removal keeps other pieces verbatim") {
    const auto p = product("x", "dress", 1, "Folded Cuffs, Hook and zip fastening; Logo print.");
    const std::map<std::string, std::string> alias{{"folded cuffs", "folded cuffs"},
                                                   {"hook and zip fastening", "zip and hook fastening"},
                                                   {"logo print", "logo print"}};
    CHECK(remove_feature(p, "zip and hook fastening", alias).caption == "Folded Cuffs, Logo print");
    CHECK(remove_feature(p, "folded cuffs", alias).caption == "Hook and zip fastening, Logo print");
    CHECK(remove_feature(p, "absent", alias).caption == "Folded Cuffs, Hook and zip fastening, Logo print");
    CHECK(remove_feature(p, "logo print", alias, std::string("data:edited")).image_ref == "data:edited");
    CHECK(clean_caption(remove_feature(p, "logo print", alias).caption) ==
          std::vector<std::string>{"folded cuffs", "hook and zip fastening"});
}

TEST_CASE("ablation directions and csv") {
    AblationCase c;
    c.feature = "folded cuffs";
    c.polarity = Polarity::good;
    c.feature_score = 0.307;
    c.original_score = 2.636;
    c.modified_score = 2.440;
    CHECK(direction(c) == Direction::original_higher);
    CHECK(matches_expectation(c));
    c.polarity = Polarity::bad;
    CHECK_FALSE(matches_expectation(c));
    c.modified_score = c.original_score;
    CHECK(direction(c) == Direction::tie);
    CHECK_FALSE(matches_expectation(c));
    c.polarity = Polarity::good;
    c.modified_score = 2.44;
    CHECK(ablation_csv({c}) ==
          "remove,feature,feature_score,original_s,modified_s,direction,matches\ngood,folded cuffs,0.307,2.636,2.44,original,yes\n");
}

TEST_CASE("identical inputs score identically") {
    const auto catalog = generate(default_spec(120, 3));
    BuiltinEmbeddingProvider provider;
    EncoderConfig cfg;
    cfg.reduced_dim = 4;
    const auto enc = FeatureEncoder::fit(catalog, provider, cfg);
    const auto thresholds = fit_thresholds(catalog.sales(), 3);
    const auto ds = enc.encode_all(catalog.products, assign_classes(catalog.sales(), thresholds), 3, provider);
    ForestParams p;
    p.n_trees = 10;
    const auto model = train(ds, p);

    AblationCase c;
    c.feature = "none";
    c.original = catalog.products[0];
    c.modified = catalog.products[0];
    const auto scored = run_ablation({c}, model, provider, enc);
    CHECK(scored[0].original_score == scored[0].modified_score);
    CHECK(direction(scored[0]) == Direction::tie);

    const auto cf = canonicalize(catalog, cluster_synonyms(build_universe(catalog), {}));
    const auto ranking = influence_scores(catalog, cf.feature_set, cf.product_features);
    const auto [top, bottom] = top_bottom(ranking, 2);
    const auto cases = plan_ablation(catalog, cf, top, Polarity::good, 7, 1);
    REQUIRE(cases.size() == 7);
    // Round-robin alternates between the two features.
    CHECK(cases[0].feature == top[0].feature);
    CHECK(cases[1].feature == top[1].feature);
    for (const auto& k : cases) {
        const auto& feats = cf.product_features.at(k.original.id);
        CHECK(std::find(feats.begin(), feats.end(), k.feature) != feats.end());
        for (const auto& phrase : clean_caption(k.modified.caption)) {
            CHECK(cf.feature_set.alias_map.at(phrase) != k.feature);
        }
    }
}
