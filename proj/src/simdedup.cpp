#include "trendlens/simdedup.hpp"

#include "http_client.hpp"
#include "trendlens/error.hpp"
#include "trendlens/util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace trendlens {

namespace {

constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

std::uint64_t mod_mersenne61(unsigned __int128 x) {
    auto lo = static_cast<std::uint64_t>(x & kMersenne61);
    auto hi = static_cast<std::uint64_t>(x >> 61);
    std::uint64_t r = lo + hi;
    while (r >= kMersenne61) {
        r -= kMersenne61;
    }
    return r;
}

std::vector<std::string> tokens(std::string_view phrase) {
    std::vector<std::string> out;
    std::istringstream in{std::string(phrase)};
    std::string tok;
    while (in >> tok) {
        out.push_back(std::move(tok));
    }
    return out;
}

}  // namespace

ShingleMode parse_shingle_mode(std::string_view name) {
    if (name == "unigram" || name == "word-unigram" || name == "word_unigram") {
        return ShingleMode::word_unigram;
    }
    if (name == "bigram" || name == "word-bigram" || name == "word_bigram") {
        return ShingleMode::word_bigram;
    }
    if (name == "trigram" || name == "char-trigram" || name == "char_trigram") {
        return ShingleMode::char_trigram;
    }
    throw ValidationError("unknown shingling mode '" + std::string(name) + "'");
}

std::string_view to_string(ShingleMode mode) noexcept {
    switch (mode) {
    case ShingleMode::word_unigram:
        return "unigram";
    case ShingleMode::word_bigram:
        return "bigram";
    case ShingleMode::char_trigram:
        return "trigram";
    }
    return "unigram";
}

ShingleSet shingle(std::string_view phrase, ShingleMode mode) {
    const auto toks = tokens(phrase);
    if (toks.empty()) {
        throw ValidationError("cannot shingle an empty phrase");
    }
    ShingleSet out;
    switch (mode) {
    case ShingleMode::word_unigram:
        out.insert(toks.begin(), toks.end());
        break;
    case ShingleMode::word_bigram:
        if (toks.size() == 1) {
            out.insert(toks.front());
        }
        for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
            out.insert(toks[i] + " " + toks[i + 1]);
        }
        break;
    case ShingleMode::char_trigram: {
        const std::string padded = "^" + std::string(phrase) + "$";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
            out.insert(padded.substr(i, 3));
        }
        break;
    }
    }
    return out;
}

double exact_jaccard(const ShingleSet& a, const ShingleSet& b) {
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    for (const auto& s : a) {
        common += b.count(s);
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

MinHasher::MinHasher(std::size_t d, std::uint64_t seed) : seed_(seed) {
    if (d == 0) {
        throw ValidationError("minhash dimension must be at least 1");
    }
    a_.reserve(d);
    b_.reserve(d);
    std::uint64_t state = mix64(seed ^ 0x6d696e68617368ULL);
    for (std::size_t j = 0; j < d; ++j) {
        std::uint64_t a = 0;
        while (a == 0) {
            state = mix64(state);
            a = state % kMersenne61;
        }
        state = mix64(state);
        a_.push_back(a);
        b_.push_back(state % kMersenne61);
    }
}

std::uint64_t MinHasher::hash(std::size_t j, std::string_view shingle) const {
    const std::uint64_t x = stable_hash(shingle) % kMersenne61;
    return mod_mersenne61(static_cast<unsigned __int128>(a_[j]) * x + b_[j]);
}

MinHashSignature MinHasher::sign(const ShingleSet& shingles) const {
    if (shingles.empty()) {
        throw ValidationError("cannot sign an empty shingle set");
    }
    MinHashSignature sig{std::vector<std::uint64_t>(a_.size(), std::numeric_limits<std::uint64_t>::max()), seed_};
    for (const auto& s : shingles) {
        const std::uint64_t x = stable_hash(s) % kMersenne61;
        for (std::size_t j = 0; j < a_.size(); ++j) {
            const auto h = mod_mersenne61(static_cast<unsigned __int128>(a_[j]) * x + b_[j]);
            sig.values[j] = std::min(sig.values[j], h);
        }
    }
    return sig;
}

MinHashSignature minhash_signature(const ShingleSet& shingles, std::size_t d, std::uint64_t seed) {
    return MinHasher(d, seed).sign(shingles);
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.size() != b.size() || a.seed != b.seed) {
        throw ValidationError("signatures are not comparable (d " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ", seed " + std::to_string(a.seed) + " vs " +
                              std::to_string(b.seed) + ")");
    }
    if (a.values.empty()) {
        throw ValidationError("cannot compare empty signatures");
    }
    std::size_t agree = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        agree += a.values[j] == b.values[j];
    }
    return static_cast<double>(agree) / static_cast<double>(a.size());
}

std::set<PhrasePair> lsh_candidates(const std::map<std::string, MinHashSignature>& signatures, std::size_t bands,
                                    std::size_t rows) {
    if (bands == 0 || rows == 0) {
        throw ValidationError("bands and rows must be positive");
    }
    for (const auto& [phrase, sig] : signatures) {
        if (bands * rows != sig.size()) {
            throw ValidationError("bands * rows = " + std::to_string(bands * rows) +
                                  " does not match signature length " + std::to_string(sig.size()) +
                                  " of '" + phrase + "'");
        }
    }
    std::set<PhrasePair> out;
    for (std::size_t band = 0; band < bands; ++band) {
        std::map<std::vector<std::uint64_t>, std::vector<const std::string*>> buckets;
        for (const auto& [phrase, sig] : signatures) {
            const auto first = sig.values.begin() + static_cast<std::ptrdiff_t>(band * rows);
            buckets[std::vector<std::uint64_t>(first, first + static_cast<std::ptrdiff_t>(rows))].push_back(&phrase);
        }
        for (const auto& [key, members] : buckets) {
            for (std::size_t i = 0; i < members.size(); ++i) {
                for (std::size_t j = i + 1; j < members.size(); ++j) {
                    // map iteration order keeps members sorted
                    out.emplace(*members[i], *members[j]);
                }
            }
        }
    }
    return out;
}

DisjointSet::DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t DisjointSet::find(std::size_t x) {
    std::size_t root = x;
    while (parent_[root] != root) {
        root = parent_[root];
    }
    while (parent_[x] != root) {
        x = std::exchange(parent_[x], root);
    }
    return root;
}

bool DisjointSet::unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) {
        return false;
    }
    if (rank_[a] < rank_[b]) {
        std::swap(a, b);
    }
    parent_[b] = a;
    if (rank_[a] == rank_[b]) {
        ++rank_[a];
    }
    return true;
}

std::set<PhrasePair> verified_pairs(const std::vector<std::string>& phrases, const DedupConfig& config) {
    if (!(config.tau0 > 0.0 && config.tau0 <= 1.0)) {
        throw ValidationError("tau0 must lie in (0, 1], got " + format_g(config.tau0));
    }
    if (config.bands * config.rows != config.d) {
        throw ValidationError("dedup.bands * dedup.rows must equal dedup.d");
    }
    const MinHasher hasher(config.d, config.seed);
    std::map<std::string, ShingleSet> shingles;
    std::map<std::string, MinHashSignature> signatures;
    for (const auto& phrase : phrases) {
        auto set = shingle(phrase, config.mode);
        signatures.emplace(phrase, hasher.sign(set));
        shingles.emplace(phrase, std::move(set));
    }
    std::set<PhrasePair> out;
    for (auto& pair : lsh_candidates(signatures, config.bands, config.rows)) {
        const double sim = config.exact_verification
                               ? exact_jaccard(shingles.at(pair.first), shingles.at(pair.second))
                               : estimate_jaccard(signatures.at(pair.first), signatures.at(pair.second));
        if (sim >= config.tau0) {
            out.insert(pair);
        }
    }
    return out;
}

std::vector<SynonymGroup> cluster_synonyms(const FeatureUniverse& universe, const DedupConfig& config) {
    if (universe.empty()) {
        throw ValidationError("cannot cluster an empty feature universe");
    }
    const auto phrases = universe.phrases();
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        index.emplace(phrases[i], i);
    }
    DisjointSet sets(phrases.size());
    for (const auto& [a, b] : verified_pairs(phrases, config)) {
        sets.unite(index.at(a), index.at(b));
    }
    std::map<std::size_t, SynonymGroup> by_root;
    for (std::size_t i = 0; i < phrases.size(); ++i) {
        by_root[sets.find(i)].members.insert(phrases[i]);
    }
    std::vector<SynonymGroup> groups;
    groups.reserve(by_root.size());
    for (auto& [root, group] : by_root) {
        groups.push_back(std::move(group));
    }
    std::sort(groups.begin(), groups.end(),
              [](const SynonymGroup& a, const SynonymGroup& b) { return *a.members.begin() < *b.members.begin(); });
    for (auto& g : groups) {
        g.representative = heuristic_representative(g, universe);
    }
    return groups;
}

HttpRepresentativeAdapter::HttpRepresentativeAdapter(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {}

std::string HttpRepresentativeAdapter::exchange(const std::string& request_json) {
    const auto [base, path] = detail::split_url(url_);
    httplib::Client client(base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    auto res = client.Post(path, request_json, "application/json");
    if (!res) {
        throw TransportError("representative adapter at " + url_ + " unreachable: " + httplib::to_string(res.error()),
                             1);
    }
    if (res->status != 200) {
        throw TransportError("representative adapter at " + url_ + " returned HTTP " + std::to_string(res->status) +
                                 ": " + res->body,
                             1, res->status);
    }
    return res->body;
}

std::string heuristic_representative(const SynonymGroup& group, const FeatureUniverse& universe) {
    if (group.members.empty()) {
        throw ValidationError("synonym group has no members");
    }
    auto freq = [&](const std::string& p) {
        auto it = universe.frequency.find(p);
        return it == universe.frequency.end() ? std::size_t{0} : it->second;
    };
    return *std::min_element(group.members.begin(), group.members.end(),
                             [&](const std::string& a, const std::string& b) {
                                 const auto fa = freq(a);
                                 const auto fb = freq(b);
                                 if (fa != fb) {
                                     return fa > fb;
                                 }
                                 if (a.size() != b.size()) {
                                     return a.size() < b.size();
                                 }
                                 return a < b;
                             });
}

std::string select_representative(const SynonymGroup& group, const FeatureUniverse& universe,
                                  RepresentativeStrategy strategy, RepresentativeAdapter* adapter) {
    if (group.members.empty()) {
        throw ValidationError("synonym group has no members");
    }
    if (strategy == RepresentativeStrategy::heuristic || group.members.size() == 1) {
        return heuristic_representative(group, universe);
    }
    if (adapter == nullptr) {
        throw ValidationError("external representative selection requires an adapter");
    }
    nlohmann::json request;
    request["candidates"] = std::vector<std::string>(group.members.begin(), group.members.end());
    const auto reply = adapter->exchange(request.dump());
    const auto parsed = nlohmann::json::parse(reply, nullptr, false);
    if (parsed.is_object() && parsed.contains("choice") && parsed["choice"].is_string()) {
        auto choice = parsed["choice"].get<std::string>();
        if (group.members.contains(choice)) {
            return choice;
        }
    }
    return heuristic_representative(group, universe);
}

CanonicalFeatures canonicalize(const Catalog& catalog, const std::vector<SynonymGroup>& groups) {
    CanonicalFeatures out;
    auto& fs = out.feature_set;
    for (const auto& g : groups) {
        if (!g.members.contains(g.representative)) {
            throw ValidationError("representative '" + g.representative + "' is not a member of its group");
        }
        for (const auto& m : g.members) {
            if (!fs.alias_map.emplace(m, g.representative).second) {
                throw ValidationError("phrase '" + m + "' appears in more than one synonym group");
            }
        }
        fs.features.push_back(g.representative);
    }
    std::sort(fs.features.begin(), fs.features.end());
    for (const auto& p : catalog.products) {
        std::vector<std::string> canon;
        for (const auto& phrase : clean_caption(p.caption)) {
            auto it = fs.alias_map.find(phrase);
            if (it == fs.alias_map.end()) {
                throw ValidationError("phrase '" + phrase + "' of product '" + p.id + "' is not covered by any group");
            }
            if (std::find(canon.begin(), canon.end(), it->second) == canon.end()) {
                canon.push_back(it->second);
            }
        }
        out.product_features.emplace(p.id, std::move(canon));
    }
    return out;
}

}  // namespace trendlens
