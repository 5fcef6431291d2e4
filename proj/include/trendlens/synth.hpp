#pragma once

#include "trendlens/corpus.hpp"
#include "trendlens/labeler.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace trendlens {

/// A caption feature with a known additive effect on sales. `variants` are the surface forms
/// written into captions (the canonical form is always one of them).
struct PlantedFeature {
    std::string canonical;
    std::vector<std::string> variants;
    double effect = 0.0;
};

struct PlantedLevel {
    std::string level;
    double effect = 0.0;
};

/// Generative description of a synthetic catalog:
///   sales = base + sum(feature effects) + sum(level effects) + N(0, noise_sigma), clipped at 0.
struct SynthSpec {
    std::size_t n_products = 1000;
    std::vector<PlantedFeature> features;
    std::size_t min_features = 2;
    std::size_t max_features = 5;
    /// Every product carries k = min_features features and, when F divides n, every feature occurs
    /// equally often.
    bool balanced = false;
    std::map<std::string, std::vector<PlantedLevel>> categoricals;
    std::vector<std::string> numeric_names;
    double base_sales = 100.0;
    double noise_sigma = 8.0;
    std::string type_attribute = "product_type";
    std::uint64_t seed = 1;

    /// Throws ValidationError describing the first problem found.
    void validate() const;

    nlohmann::json to_json() const;
    static SynthSpec from_json(const nlohmann::json& j);
};

/// General-purpose catalog: 22 categorical and 13 numeric attributes, 40 caption features
/// (some with reordered synonyms), 24 product types and a moderately informative fashion degree.
SynthSpec default_spec(std::size_t n_products = 1000, std::uint64_t seed = 1);

/// Classes driven mostly by one categorical attribute plus caption features; used to check that
/// the classifier can learn planted structure.
SynthSpec learnability_spec(std::size_t n_products = 1000, std::uint64_t seed = 1);

/// Sales driven by caption features alone, with widely spread effects.
SynthSpec ablation_spec(std::size_t n_products = 1000, std::uint64_t seed = 1);

/// Named preset: "default", "learnability" or "ablation".
SynthSpec preset_spec(std::string_view name, std::size_t n_products, std::uint64_t seed);

Catalog generate(const SynthSpec& spec);

/// Noise-free sales implied by a synthetic spec for a generated product (features read back from its caption).
double expected_sales(const SynthSpec& spec, const Product& product);

/// Expected accuracy of the Bayes-optimal classifier that knows the spec, under the given thresholds.
double bayes_accuracy(const SynthSpec& spec, const Catalog& catalog, const QuantileThresholds& thresholds);

}  // namespace trendlens
