#include "trendlens/captions.hpp"
#include "trendlens/synth.hpp"

#include <doctest.h>

#include <cctype>
#include <map>
#include <set>

using namespace trendlens;

using Phrases = std::vector<std::string>;

TEST_CASE("clean_caption basic examples") {
    CHECK(clean_caption("Cable Knit, Folded Cuffs.") == Phrases{"cable knit", "folded cuffs"});
    CHECK(clean_caption("").empty());
    CHECK(clean_caption("Zip detail,, zip detail.") == Phrases{"zip detail"});
}

TEST_CASE("clean_caption strips punctuation and collapses whitespace") {
    CHECK(clean_caption("  V-Neck ;  Logo   Print!! ") == Phrases{"v-neck", "logo print"});
    CHECK(clean_caption("100% cotton; 42. (new)") == Phrases{"100 cotton", "new"});
    CHECK(clean_caption("...;;,") == Phrases{});
    CHECK(clean_caption("Café au lait") == Phrases{"caf au lait"});
}

TEST_CASE("build_universe counts products per phrase") {
    const auto c = make_catalog({Product{"1", "a, b", "", {}, {}, 1}, Product{"2", "b, c", "", {}, {}, 2}});
    const auto u = build_universe(c);
    CHECK(u.phrases() == Phrases{"a", "b", "c"});
    CHECK(u.frequency.at("a") == 1);
    CHECK(u.frequency.at("b") == 2);
    CHECK(u.frequency.at("c") == 1);
    CHECK(u.source_index.at("b") == std::set<std::string>{"1", "2"});
}

TEST_CASE("captions without phrases give an empty universe") {
    const auto c = make_catalog({Product{"1", "", "", {}, {}, 1}, Product{"2", "12, 34.", "", {}, {}, 2}});
    CHECK(build_universe(c).empty());
}

TEST_CASE("universe frequencies agree with a direct per-product recount") {
    const auto c = generate(default_spec(200, 5));
    const auto u = build_universe(c);
    // Oracle: lowercase each comma/semicolon/period piece by hand, drop non-letter characters.
    std::map<std::string, std::set<std::string>> oracle;
    for (const auto& p : c.products) {
        std::string piece;
        auto flush = [&] {
            std::string norm;
            bool space = false;
            for (char ch : piece) {
                if (ch == ' ') {
                    space = !norm.empty();
                } else if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-') {
                    if (space) {
                        norm += ' ';
                        space = false;
                    }
                    norm += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                }
            }
            if (!norm.empty()) {
                oracle[norm].insert(p.id);
            }
            piece.clear();
        };
        for (char ch : p.caption) {
            if (ch == ',' || ch == ';' || ch == '.') {
                flush();
            } else {
                piece += ch;
            }
        }
        flush();
    }
    REQUIRE(oracle.size() == u.size());
    for (const auto& [phrase, ids] : oracle) {
        CHECK(u.frequency.at(phrase) == ids.size());
    }
}
