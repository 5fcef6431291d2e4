#include "trendlens/error.hpp"
#include "trendlens/simdedup.hpp"
#include "trendlens/synth.hpp"

#include <doctest.h>
#include <httplib.h>

#include <algorithm>
#include <random>
#include <thread>

using namespace trendlens;

namespace {

FeatureUniverse universe_of(const std::map<std::string, std::size_t>& freq) {
    FeatureUniverse u;
    for (const auto& [phrase, f] : freq) {
        for (std::size_t i = 0; i < f; ++i) {
            u.add("p" + std::to_string(i), {phrase});
        }
    }
    return u;
}

ShingleSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t universe, const std::string& prefix = "t") {
    ShingleSet s;
    std::uniform_int_distribution<std::size_t> pick(0, universe - 1);
    while (s.size() < n) {
        s.insert(prefix + std::to_string(pick(rng)));
    }
    return s;
}

struct ScriptedAdapter final : RepresentativeAdapter {
    std::string reply;
    std::string last_request;
    std::string exchange(const std::string& request_json) override {
        last_request = request_json;
        return reply;
    }
};

}  // namespace

TEST_CASE("shingling") {
    CHECK(shingle("zip and hook fastening", ShingleMode::word_unigram) ==
          shingle("hook and zip fastening", ShingleMode::word_unigram));
    CHECK(exact_jaccard(shingle("zip and hook fastening", ShingleMode::word_unigram),
                        shingle("hook and zip fastening", ShingleMode::word_unigram)) == 1.0);
    CHECK(shingle("cable knit", ShingleMode::word_unigram) == ShingleSet{"cable", "knit"});
    CHECK(shingle("cable knit fabric", ShingleMode::word_bigram) == ShingleSet{"cable knit", "knit fabric"});
    CHECK(shingle("knit", ShingleMode::word_bigram) == ShingleSet{"knit"});

    // Oracle: every length-3 window of the padded string.
    const std::string padded = "^v-neck$";
    ShingleSet expected;
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        expected.insert(padded.substr(i, 3));
    }
    CHECK(shingle("v-neck", ShingleMode::char_trigram) == expected);
    CHECK(expected.size() == 6);

    CHECK(parse_shingle_mode("trigram") == ShingleMode::char_trigram);
    CHECK_THROWS_AS(parse_shingle_mode("fourgram"), ValidationError);
    CHECK_THROWS_AS(shingle("   ", ShingleMode::word_unigram), ValidationError);
}

TEST_CASE("minhash signatures") {
    const ShingleSet a{"cable", "knit"};
    CHECK(minhash_signature(a, 128, 3) == minhash_signature(a, 128, 3));
    CHECK(minhash_signature(a, 128, 3) != minhash_signature(a, 128, 4));
    CHECK(estimate_jaccard(minhash_signature(a, 128, 3), minhash_signature(a, 128, 3)) == 1.0);

    SUBCASE("d = 1 is the global minimum hash") {
        MinHasher h(1, 9);
        const ShingleSet s{"alpha", "beta", "gamma", "delta"};
        std::uint64_t lo = UINT64_MAX;
        for (const auto& x : s) {
            lo = std::min(lo, h.hash(0, x));
        }
        CHECK(h.sign(s).values == std::vector<std::uint64_t>{lo});
    }

    SUBCASE("half-overlap subset") {
        std::mt19937_64 rng(11);
        const auto b = random_set(rng, 200, 100000);
        ShingleSet sub;
        auto it = b.begin();
        for (int i = 0; i < 100; ++i) {
            sub.insert(*it++);
        }
        CHECK(exact_jaccard(sub, b) == 0.5);
        CHECK(std::abs(estimate_jaccard(minhash_signature(sub, 128, 5), minhash_signature(b, 128, 5)) - 0.5) <= 0.15);
    }

    SUBCASE("disjoint sets estimate near zero over seeds") {
        std::mt19937_64 rng(12);
        const auto x = random_set(rng, 300, 1000000, "x");
        const auto y = random_set(rng, 300, 1000000, "y");
        int ok = 0;
        for (std::uint64_t seed = 1; seed <= 200; ++seed) {
            ok += estimate_jaccard(minhash_signature(x, 128, seed), minhash_signature(y, 128, seed)) <= 0.05;
        }
        CHECK(ok >= 198);
    }

    CHECK_THROWS_AS(estimate_jaccard(minhash_signature(a, 64, 1), minhash_signature(a, 128, 1)), ValidationError);
    CHECK_THROWS_AS(estimate_jaccard(minhash_signature(a, 128, 1), minhash_signature(a, 128, 2)), ValidationError);
    CHECK_THROWS_AS(minhash_signature({}, 128, 1), ValidationError);
}

TEST_CASE("lsh candidates match a brute-force banding check") {
    std::mt19937_64 rng(21);
    std::map<std::string, MinHashSignature> sigs;
    // Small token universe so that many pairs share bands.
    for (int i = 0; i < 120; ++i) {
        sigs["phrase" + std::to_string(i)] = minhash_signature(random_set(rng, 3, 8), 32, 2);
    }
    const std::size_t bands = 8;
    const std::size_t rows = 4;
    std::set<PhrasePair> expected;
    for (auto i = sigs.begin(); i != sigs.end(); ++i) {
        for (auto j = std::next(i); j != sigs.end(); ++j) {
            for (std::size_t b = 0; b < bands; ++b) {
                if (std::equal(i->second.values.begin() + static_cast<long>(b * rows),
                               i->second.values.begin() + static_cast<long>((b + 1) * rows),
                               j->second.values.begin() + static_cast<long>(b * rows))) {
                    expected.emplace(i->first, j->first);
                    break;
                }
            }
        }
    }
    CHECK(!expected.empty());
    CHECK(lsh_candidates(sigs, bands, rows) == expected);

    std::map<std::string, MinHashSignature> apart;
    apart["a"] = MinHashSignature{std::vector<std::uint64_t>(32, 1), 2};
    apart["b"] = MinHashSignature{std::vector<std::uint64_t>(32, 2), 2};
    apart["c"] = MinHashSignature{std::vector<std::uint64_t>(32, 1), 2};
    CHECK(lsh_candidates(apart, bands, rows) == std::set<PhrasePair>{{"a", "c"}});
    CHECK_THROWS_AS(lsh_candidates(apart, 16, 4), ValidationError);
}

TEST_CASE("disjoint set") {
    DisjointSet ds(5);
    CHECK(ds.unite(0, 1));
    CHECK(ds.unite(3, 4));
    CHECK_FALSE(ds.unite(1, 0));
    CHECK(ds.unite(1, 4));
    CHECK(ds.find(0) == ds.find(3));
    CHECK(ds.find(2) != ds.find(0));
}

TEST_CASE("cluster_synonyms") {
    SUBCASE("reordered phrases merge") {
        const auto groups = cluster_synonyms(universe_of({{"hook and zip fastening", 1}, {"zip and hook fastening", 3}}), {});
        REQUIRE(groups.size() == 1);
        CHECK(groups[0].members.size() == 2);
        CHECK(groups[0].representative == "zip and hook fastening");
    }
    SUBCASE("dissimilar phrases stay apart") {
        const auto groups = cluster_synonyms(universe_of({{"cable knit", 1}, {"folded cuffs", 1}, {"logo print", 1}}), {});
        CHECK(groups.size() == 3);
    }
    SUBCASE("exact verification agrees on clear cases") {
        DedupConfig cfg;
        cfg.exact_verification = true;
        const auto groups = cluster_synonyms(
            universe_of({{"hook and zip fastening", 1}, {"zip and hook fastening", 1}, {"logo print", 1}}), cfg);
        CHECK(groups.size() == 2);
    }
    SUBCASE("synthetic reordering variants are recovered") {
        const auto spec = default_spec(400, 3);
        const auto catalog = generate(spec);
        const auto universe = build_universe(catalog);
        const auto groups = cluster_synonyms(universe, {});
        std::map<std::string, std::set<std::string>> found;
        for (const auto& g : groups) {
            for (const auto& m : g.members) {
                found[m] = g.members;
            }
        }
        for (const auto& f : spec.features) {
            for (const auto& v : f.variants) {
                REQUIRE(universe.frequency.contains(v));
                CHECK(found.at(v) == std::set<std::string>(f.variants.begin(), f.variants.end()));
            }
        }
    }
    CHECK_THROWS_AS(cluster_synonyms(FeatureUniverse{}, {}), ValidationError);
    DedupConfig bad;
    bad.tau0 = 0.0;
    CHECK_THROWS_AS(cluster_synonyms(universe_of({{"a", 1}}), bad), ValidationError);
}

TEST_CASE("representative selection") {
    const auto u = universe_of({{"cable knit", 5}, {"cable knit fabric", 2}, {"zip detail", 3}, {"zip details", 3}});
    CHECK(heuristic_representative({{"cable knit", "cable knit fabric"}, ""}, u) == "cable knit");
    CHECK(heuristic_representative({{"zip detail", "zip details"}, ""}, u) == "zip detail");
    CHECK(heuristic_representative({{"zip details"}, ""}, u) == "zip details");

    ScriptedAdapter adapter;
    const SynonymGroup g{{"cable knit", "cable knit fabric"}, ""};
    adapter.reply = R"({"choice":"cable knit fabric"})";
    CHECK(select_representative(g, u, RepresentativeStrategy::external, &adapter) == "cable knit fabric");
    CHECK(nlohmann::json::parse(adapter.last_request)["candidates"].size() == 2);
    adapter.reply = R"({"choice":"something else"})";
    CHECK(select_representative(g, u, RepresentativeStrategy::external, &adapter) == "cable knit");
    adapter.reply = "not json";
    CHECK(select_representative(g, u, RepresentativeStrategy::external, &adapter) == "cable knit");
    CHECK_THROWS_AS(select_representative(g, u, RepresentativeStrategy::external, nullptr), ValidationError);
}

TEST_CASE("http representative adapter against an in-process server") {
    httplib::Server server;
    server.Post("/choose", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        res.set_content(nlohmann::json{{"choice", body["candidates"].back()}}.dump(), "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const auto base = "http://127.0.0.1:" + std::to_string(port);
    const auto u = universe_of({{"cable knit", 5}, {"cable knit fabric", 2}});
    const SynonymGroup g{{"cable knit", "cable knit fabric"}, ""};
    HttpRepresentativeAdapter ok(base + "/choose");
    CHECK(select_representative(g, u, RepresentativeStrategy::external, &ok) == "cable knit fabric");
    HttpRepresentativeAdapter broken(base + "/broken");
    CHECK_THROWS_AS(broken.exchange("{}"), TransportError);

    server.stop();
    worker.join();
    HttpRepresentativeAdapter gone(base + "/choose", std::chrono::milliseconds(500));
    CHECK_THROWS_AS(gone.exchange("{}"), TransportError);
}

TEST_CASE("canonicalize") {
    const auto catalog = make_catalog({Product{"a", "Zip and hook fastening, Logo print", "", {}, {}, 1},
                                       Product{"b", "hook and zip fastening; zip and hook fastening", "", {}, {}, 2}});
    const auto universe = build_universe(catalog);

    std::vector<SynonymGroup> singletons;
    for (const auto& p : universe.phrases()) {
        singletons.push_back({{p}, p});
    }
    const auto id = canonicalize(catalog, singletons);
    for (const auto& [k, v] : id.feature_set.alias_map) {
        CHECK(k == v);
    }
    CHECK(id.product_features.at("b") == std::vector<std::string>{"hook and zip fastening", "zip and hook fastening"});

    const auto merged = canonicalize(catalog, cluster_synonyms(universe, {}));
    CHECK(merged.feature_set.group_count() == universe.size() - 1);
    CHECK(merged.feature_set.alias_map.at("hook and zip fastening") == "zip and hook fastening");
    CHECK(merged.product_features.at("b") == std::vector<std::string>{"zip and hook fastening"});
    CHECK(merged.product_features.at("a") == std::vector<std::string>{"zip and hook fastening", "logo print"});

    std::vector<SynonymGroup> missing{{{"logo print"}, "logo print"}};
    CHECK_THROWS_AS(canonicalize(catalog, missing), ValidationError);
    std::vector<SynonymGroup> bad_rep{{{"logo print"}, "other"}};
    CHECK_THROWS_AS(canonicalize(catalog, bad_rep), ValidationError);
}

TEST_CASE("canonical lists agree with a direct alias lookup on a synthetic catalog") {
    const auto catalog = generate(default_spec(200, 8));
    const auto cf = canonicalize(catalog, cluster_synonyms(build_universe(catalog), {}));
    for (const auto& p : catalog.products) {
        std::vector<std::string> expected;
        for (const auto& phrase : clean_caption(p.caption)) {
            const auto& c = cf.feature_set.alias_map.at(phrase);
            if (std::find(expected.begin(), expected.end(), c) == expected.end()) {
                expected.push_back(c);
            }
        }
        CHECK(cf.product_features.at(p.id) == expected);
    }
}
