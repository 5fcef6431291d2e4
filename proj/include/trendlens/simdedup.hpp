#pragma once

#include "trendlens/captions.hpp"
#include "trendlens/corpus.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trendlens {

enum class ShingleMode { word_unigram, word_bigram, char_trigram };

/// Accepts "unigram", "bigram", "trigram" (and the word-/char- prefixed spellings).
ShingleMode parse_shingle_mode(std::string_view name);
std::string_view to_string(ShingleMode mode) noexcept;

using ShingleSet = std::set<std::string>;

/// Char trigrams are taken over the phrase padded with '^' and '$', so every non-empty phrase
/// has at least one. Bigram mode falls back to unigrams for one-token phrases.
ShingleSet shingle(std::string_view phrase, ShingleMode mode);

double exact_jaccard(const ShingleSet& a, const ShingleSet& b);

struct MinHashSignature {
    std::vector<std::uint64_t> values;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return values.size(); }
    bool operator==(const MinHashSignature&) const = default;
};

/// d hash functions h_j(x) = (a_j * x + b_j) mod (2^61 - 1), with (a_j, b_j) derived from the seed.
class MinHasher {
public:
    MinHasher(std::size_t d, std::uint64_t seed);

    MinHashSignature sign(const ShingleSet& shingles) const;

    std::size_t dimension() const noexcept { return a_.size(); }
    std::uint64_t seed() const noexcept { return seed_; }

    /// h_j applied to one shingle.
    std::uint64_t hash(std::size_t j, std::string_view shingle) const;

private:
    std::uint64_t seed_;
    std::vector<std::uint64_t> a_;
    std::vector<std::uint64_t> b_;
};

MinHashSignature minhash_signature(const ShingleSet& shingles, std::size_t d, std::uint64_t seed);

/// Fraction of positions on which the signatures agree.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

using PhrasePair = std::pair<std::string, std::string>;

/// Pairs (first < second) whose signatures agree on every row of at least one band.
std::set<PhrasePair> lsh_candidates(const std::map<std::string, MinHashSignature>& signatures, std::size_t bands,
                                    std::size_t rows);

/// Union-find over dense indices with path compression and union by rank.
class DisjointSet {
public:
    explicit DisjointSet(std::size_t n);

    std::size_t find(std::size_t x);
    /// Returns false when both already share a root.
    bool unite(std::size_t a, std::size_t b);
    std::size_t size() const noexcept { return parent_.size(); }

private:
    std::vector<std::size_t> parent_;
    std::vector<unsigned> rank_;
};

struct DedupConfig {
    std::size_t d = 128;
    std::uint64_t seed = 1;
    double tau0 = 0.8;
    std::size_t bands = 16;
    std::size_t rows = 8;
    ShingleMode mode = ShingleMode::word_unigram;
    /// Verify candidates on exact shingle-set Jaccard instead of the signature estimate.
    bool exact_verification = false;
};

struct SynonymGroup {
    std::set<std::string> members;
    std::string representative;

    bool operator==(const SynonymGroup&) const = default;
};

/// LSH candidate pairs that pass the similarity check (similarity >= tau0).
std::set<PhrasePair> verified_pairs(const std::vector<std::string>& phrases, const DedupConfig& config);

/// Transitive closure of verified pairs. Groups are ordered by their smallest member and carry
/// heuristic representatives.
std::vector<SynonymGroup> cluster_synonyms(const FeatureUniverse& universe, const DedupConfig& config);

enum class RepresentativeStrategy { heuristic, external };

/// Text-generation backend used for representative selection. Receives `{"candidates": [...]}`
/// and returns `{"choice": "..."}`; transport failures are reported as TransportError.
class RepresentativeAdapter {
public:
    virtual ~RepresentativeAdapter() = default;
    virtual std::string exchange(const std::string& request_json) = 0;
};

/// POSTs the request body to an HTTP endpoint.
class HttpRepresentativeAdapter final : public RepresentativeAdapter {
public:
    HttpRepresentativeAdapter(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(30));
    std::string exchange(const std::string& request_json) override;

private:
    std::string url_;
    std::chrono::milliseconds timeout_;
};

/// Highest frequency, then shortest text, then lexicographically smallest.
std::string heuristic_representative(const SynonymGroup& group, const FeatureUniverse& universe);

std::string select_representative(const SynonymGroup& group, const FeatureUniverse& universe,
                                  RepresentativeStrategy strategy, RepresentativeAdapter* adapter = nullptr);

struct FeatureSet {
    /// Canonical phrases, sorted.
    std::vector<std::string> features;
    std::map<std::string, std::string> alias_map;

    std::size_t group_count() const noexcept { return features.size(); }
};

struct CanonicalFeatures {
    FeatureSet feature_set;
    /// Product id -> canonical phrases in caption order, duplicates collapsed.
    std::map<std::string, std::vector<std::string>> product_features;
};

CanonicalFeatures canonicalize(const Catalog& catalog, const std::vector<SynonymGroup>& groups);

}  // namespace trendlens
