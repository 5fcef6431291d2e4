#pragma once

#include "trendlens/corpus.hpp"
#include "trendlens/encode.hpp"
#include "trendlens/forest.hpp"
#include "trendlens/influence.hpp"
#include "trendlens/labeler.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trendlens {

/// Three products of one type with distinct true classes 1, 2 and 3 (stored in that order).
struct Triple {
    std::string product_type;
    std::array<std::string, 3> ids;
    std::array<SalesClass, 3> truth{};
};

struct TripleResult {
    std::array<double, 3> predicted{};
    int concordant = 0;
    int discordant = 0;
    double tau = 0.0;
};

struct TauSummary {
    double sum = 0.0;
    /// Headline figure: sum / m, in [-1, 1].
    double mean = 0.0;
    std::size_t m = 0;
};

inline constexpr std::string_view kDefaultTypeAttribute = "product_type";

/// Samples `m` distinct eligible types (those having at least one product of each class 1..3)
/// and one product per class within each.
std::vector<Triple> select_triples(const Catalog& catalog, const std::map<std::string, SalesClass>& labels,
                                   std::size_t m, std::uint64_t seed,
                                   std::string_view type_attribute = kDefaultTypeAttribute);

/// Tau over the three pairs of a triple: (concordant - discordant) / 3. Pairs with equal
/// predicted scores count towards neither.
TripleResult kendall_tau_triple(const std::array<double, 3>& predicted, const std::array<SalesClass, 3>& truth);

TauSummary kendall_tau_total(const std::vector<TripleResult>& results);

/// Triples ranked perfectly (tau == 1).
std::size_t correct_triple_count(const std::vector<TripleResult>& results);

enum class Polarity { good, bad };

std::string_view to_string(Polarity polarity) noexcept;

struct AblationCase {
    std::string feature;
    Polarity polarity = Polarity::good;
    double feature_score = 0.0;
    Product original;
    Product modified;
    double original_score = 0.0;
    double modified_score = 0.0;
};

enum class Direction { original_higher, modified_higher, tie };

std::string_view to_string(Direction direction) noexcept;
Direction direction(const AblationCase& c) noexcept;
/// Good features should lower the score when removed; bad features should raise it.
bool matches_expectation(const AblationCase& c) noexcept;

/// Copy of `product` whose caption drops every phrase mapping (through `alias_map`) to `feature`.
/// Remaining caption pieces keep their raw text. `alternate_image_ref` swaps in an externally
/// edited image.
Product remove_feature(const Product& product, const std::string& feature,
                       const std::map<std::string, std::string>& alias_map,
                       const std::optional<std::string>& alternate_image_ref = std::nullopt);

/// Round-robins over `records`, pairing each feature with a random product that carries it,
/// until `n_cases` cases exist or every (feature, product) pairing is used.
std::vector<AblationCase> plan_ablation(const Catalog& catalog, const CanonicalFeatures& canonical,
                                        const std::vector<InfluenceRecord>& records, Polarity polarity,
                                        std::size_t n_cases, std::uint64_t seed);

/// Scores original and modified products with the prediction score.
std::vector<AblationCase> run_ablation(std::vector<AblationCase> cases, const ForestModel& model,
                                       EmbeddingProvider& provider, const FeatureEncoder& encoder);

/// remove,feature,feature_score,original_s,modified_s,direction,matches
std::string ablation_csv(const std::vector<AblationCase>& cases);

/// One row per triple plus totals.
std::string triples_csv(const std::vector<Triple>& triples, const std::vector<TripleResult>& results);

}  // namespace trendlens
