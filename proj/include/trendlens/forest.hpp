#pragma once

#include "trendlens/encode.hpp"
#include "trendlens/labeler.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace trendlens {

struct ForestParams {
    std::size_t n_trees = 200;
    /// 0 grows trees until leaves are pure or too small to split.
    std::size_t max_depth = 0;
    std::size_t min_samples_split = 2;
    /// 0 means ceil(sqrt(dim)).
    std::size_t features_per_split = 0;
    bool bootstrap = true;
    std::uint64_t seed = 1;
    /// Worker threads for tree construction; results do not depend on it.
    unsigned threads = 1;
};

/// Axis-aligned binary tree stored flat. Internal nodes send x[feature] <= threshold left.
/// Leaves keep per-class sample counts.
struct DecisionTree {
    struct Node {
        std::int32_t feature = -1;
        double threshold = 0.0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        /// Offset into `counts` for leaves.
        std::uint32_t counts_offset = 0;

        bool operator==(const Node&) const = default;
    };

    std::vector<Node> nodes;
    std::vector<std::uint32_t> counts;

    bool operator==(const DecisionTree&) const = default;

    /// Single-leaf tree with the given class counts.
    static DecisionTree leaf(std::span<const std::uint32_t> class_counts);

    /// Leaf class counts reached by `x`.
    std::span<const std::uint32_t> leaf_counts(std::span<const double> x, std::size_t class_count) const;
    std::size_t depth() const;
    std::size_t leaf_count() const;
};

struct ClassDistribution {
    /// probs[i] belongs to class i + 1.
    std::vector<double> probs;
};

class ForestModel {
public:
    ForestModel(std::vector<DecisionTree> trees, int class_count, std::size_t dim, std::string layout_fingerprint,
                ForestParams params = {}, double train_accuracy = 0.0);

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    int class_count() const noexcept { return class_count_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::string& layout_fingerprint() const noexcept { return layout_fingerprint_; }
    const ForestParams& params() const noexcept { return params_; }
    double train_accuracy() const noexcept { return train_accuracy_; }

    /// Mean over trees of leaf class fractions; no layout check.
    ClassDistribution proba(std::span<const double> x) const;

private:
    std::vector<DecisionTree> trees_;
    int class_count_;
    std::size_t dim_;
    std::string layout_fingerprint_;
    ForestParams params_;
    double train_accuracy_;
};

/// Bootstrap-aggregated CART trees split on Gini impurity with per-node feature subsampling.
ForestModel train(const EncodedDataset& dataset, const ForestParams& params = {});

/// Throws ValidationError when the row's layout differs from the training layout.
ClassDistribution predict_proba(const ForestModel& model, const FeatureRow& row);

/// Argmax of predict_proba; ties go to the lower class.
SalesClass predict(const ForestModel& model, const FeatureRow& row);
SalesClass argmax_class(const ClassDistribution& dist);

/// Expected class index sum_i probs[i] * i, in [1, C].
double prediction_score(const ClassDistribution& dist);

double evaluate_accuracy(const ForestModel& model, const EncodedDataset& test);

std::string serialize_model(const ForestModel& model);
ForestModel parse_model(std::string_view text);
void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

}  // namespace trendlens
