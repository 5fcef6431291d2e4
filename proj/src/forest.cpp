#include "trendlens/forest.hpp"

#include "trendlens/error.hpp"
#include "trendlens/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace trendlens {

namespace {

using json = nlohmann::json;

constexpr std::string_view kModelMagic = "TRENDLENS-FOREST";
constexpr int kModelVersion = 1;

struct TrainingData {
    std::vector<double> x;  // row-major n x dim
    std::vector<int> y;     // 0-based class
    std::size_t n = 0;
    std::size_t dim = 0;

    double at(std::size_t row, std::size_t col) const { return x[row * dim + col]; }
};

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double purity = -1.0;  // sum_c l_c^2 / n_l + sum_c r_c^2 / n_r, larger is better
};

class TreeBuilder {
public:
    TreeBuilder(const TrainingData& data, int classes, const ForestParams& params, std::size_t mtry,
                std::uint64_t seed)
        : data_(data), classes_(static_cast<std::size_t>(classes)), params_(params), mtry_(mtry), rng_(seed) {}

    DecisionTree build() {
        std::vector<std::size_t> sample(data_.n);
        if (params_.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, data_.n - 1);
            for (auto& s : sample) {
                s = pick(rng_);
            }
        } else {
            std::iota(sample.begin(), sample.end(), std::size_t{0});
        }
        features_.resize(data_.dim);
        std::iota(features_.begin(), features_.end(), std::size_t{0});
        tree_.nodes.emplace_back();
        grow(sample, 0, sample.size(), 0, 0);
        return std::move(tree_);
    }

private:
    std::vector<std::uint32_t> class_counts(const std::vector<std::size_t>& sample, std::size_t begin,
                                            std::size_t end) const {
        std::vector<std::uint32_t> counts(classes_, 0);
        for (std::size_t i = begin; i < end; ++i) {
            ++counts[static_cast<std::size_t>(data_.y[sample[i]])];
        }
        return counts;
    }

    void make_leaf(std::size_t node, const std::vector<std::uint32_t>& counts) {
        tree_.nodes[node].feature = -1;
        tree_.nodes[node].counts_offset = static_cast<std::uint32_t>(tree_.counts.size());
        tree_.counts.insert(tree_.counts.end(), counts.begin(), counts.end());
    }

    SplitChoice best_split(const std::vector<std::size_t>& sample, std::size_t begin, std::size_t end) {
        SplitChoice best;
        const std::size_t m = end - begin;
        std::vector<std::pair<double, int>> values(m);
        std::vector<double> left(classes_);
        std::vector<double> right(classes_);
        std::vector<double> total(classes_, 0.0);
        for (std::size_t i = begin; i < end; ++i) {
            total[static_cast<std::size_t>(data_.y[sample[i]])] += 1.0;
        }

        // Visit features in random order, counting only non-constant ones towards mtry.
        std::size_t evaluated = 0;
        for (std::size_t f = 0; f < features_.size() && evaluated < mtry_; ++f) {
            std::uniform_int_distribution<std::size_t> pick(f, features_.size() - 1);
            std::swap(features_[f], features_[pick(rng_)]);
            const std::size_t feature = features_[f];

            double lo = data_.at(sample[begin], feature);
            double hi = lo;
            for (std::size_t i = 0; i < m; ++i) {
                const double v = data_.at(sample[begin + i], feature);
                values[i] = {v, data_.y[sample[begin + i]]};
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (lo == hi) {
                continue;
            }
            ++evaluated;
            std::sort(values.begin(), values.end());
            std::fill(left.begin(), left.end(), 0.0);
            right = total;
            double left_sq = 0.0;
            double right_sq = 0.0;
            for (double c : right) {
                right_sq += c * c;
            }
            for (std::size_t i = 0; i + 1 < m; ++i) {
                const auto c = static_cast<std::size_t>(values[i].second);
                left_sq += 2.0 * left[c] + 1.0;
                left[c] += 1.0;
                right_sq -= 2.0 * right[c] - 1.0;
                right[c] -= 1.0;
                if (values[i].first == values[i + 1].first) {
                    continue;
                }
                const double nl = static_cast<double>(i + 1);
                const double nr = static_cast<double>(m - i - 1);
                const double purity = left_sq / nl + right_sq / nr;
                if (purity > best.purity) {
                    double mid = values[i].first + (values[i + 1].first - values[i].first) / 2.0;
                    if (!(mid < values[i + 1].first)) {
                        mid = values[i].first;
                    }
                    best = {true, feature, mid, purity};
                }
            }
        }
        return best;
    }

    void grow(std::vector<std::size_t>& sample, std::size_t begin, std::size_t end, std::size_t node,
              std::size_t depth) {
        const auto counts = class_counts(sample, begin, end);
        const std::size_t m = end - begin;
        const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
        const bool depth_capped = params_.max_depth != 0 && depth >= params_.max_depth;
        if (pure || m < params_.min_samples_split || depth_capped) {
            make_leaf(node, counts);
            return;
        }
        const auto split = best_split(sample, begin, end);
        if (!split.found) {
            make_leaf(node, counts);
            return;
        }
        const auto mid_it = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(begin),
                                           sample.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t s) {
                                               return data_.at(s, split.feature) <= split.threshold;
                                           });
        const auto mid = static_cast<std::size_t>(mid_it - sample.begin());

        const auto left_id = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const auto right_id = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        auto& n = tree_.nodes[node];
        n.feature = static_cast<std::int32_t>(split.feature);
        n.threshold = split.threshold;
        n.left = left_id;
        n.right = right_id;
        grow(sample, begin, mid, left_id, depth + 1);
        grow(sample, mid, end, right_id, depth + 1);
    }

    const TrainingData& data_;
    std::size_t classes_;
    const ForestParams& params_;
    std::size_t mtry_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> features_;
    DecisionTree tree_;
};

json params_json(const ForestParams& p) {
    return {{"n_trees", p.n_trees},
            {"max_depth", p.max_depth},
            {"min_samples_split", p.min_samples_split},
            {"features_per_split", p.features_per_split},
            {"bootstrap", p.bootstrap},
            {"seed", p.seed}};
}

ForestParams params_from_json(const json& j) {
    ForestParams p;
    p.n_trees = j.at("n_trees").get<std::size_t>();
    p.max_depth = j.at("max_depth").get<std::size_t>();
    p.min_samples_split = j.at("min_samples_split").get<std::size_t>();
    p.features_per_split = j.at("features_per_split").get<std::size_t>();
    p.bootstrap = j.at("bootstrap").get<bool>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

}  // namespace

DecisionTree DecisionTree::leaf(std::span<const std::uint32_t> class_counts) {
    DecisionTree t;
    t.nodes.push_back({});
    t.counts.assign(class_counts.begin(), class_counts.end());
    return t;
}

std::span<const std::uint32_t> DecisionTree::leaf_counts(std::span<const double> x, std::size_t class_count) const {
    std::size_t node = 0;
    while (nodes[node].feature >= 0) {
        const auto& n = nodes[node];
        node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return std::span(counts).subspan(nodes[node].counts_offset, class_count);
}

std::size_t DecisionTree::depth() const {
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        const auto [node, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (nodes[node].feature >= 0) {
            stack.emplace_back(nodes[node].left, d + 1);
            stack.emplace_back(nodes[node].right, d + 1);
        }
    }
    return deepest;
}

std::size_t DecisionTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.feature < 0; }));
}

ForestModel::ForestModel(std::vector<DecisionTree> trees, int class_count, std::size_t dim,
                         std::string layout_fingerprint, ForestParams params, double train_accuracy)
    : trees_(std::move(trees)),
      class_count_(class_count),
      dim_(dim),
      layout_fingerprint_(std::move(layout_fingerprint)),
      params_(params),
      train_accuracy_(train_accuracy) {
    if (trees_.empty()) {
        throw ValidationError("a forest needs at least one tree");
    }
    if (class_count_ < 2) {
        throw ValidationError("a forest needs at least two classes");
    }
    const auto c = static_cast<std::size_t>(class_count_);
    for (const auto& t : trees_) {
        if (t.nodes.empty()) {
            throw ValidationError("forest contains an empty tree");
        }
        for (const auto& n : t.nodes) {
            if (n.feature >= 0) {
                if (static_cast<std::size_t>(n.feature) >= dim_ || n.left >= t.nodes.size() ||
                    n.right >= t.nodes.size()) {
                    throw ValidationError("forest tree references an invalid feature or node");
                }
            } else if (n.counts_offset + c > t.counts.size()) {
                throw ValidationError("forest leaf counts out of range");
            }
        }
    }
}

ClassDistribution ForestModel::proba(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw ValidationError("row has " + std::to_string(x.size()) + " values, model expects " +
                              std::to_string(dim_));
    }
    const auto c = static_cast<std::size_t>(class_count_);
    ClassDistribution dist{std::vector<double>(c, 0.0)};
    for (const auto& tree : trees_) {
        const auto counts = tree.leaf_counts(x, c);
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        if (total <= 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < c; ++i) {
            dist.probs[i] += counts[i] / total;
        }
    }
    const double sum = std::accumulate(dist.probs.begin(), dist.probs.end(), 0.0);
    for (auto& p : dist.probs) {
        p /= sum;
    }
    return dist;
}

ForestModel train(const EncodedDataset& dataset, const ForestParams& params) {
    if (dataset.size() == 0) {
        throw ValidationError("cannot train on an empty dataset");
    }
    if (dataset.labels.size() != dataset.size()) {
        throw ValidationError("dataset has " + std::to_string(dataset.size()) + " rows but " +
                              std::to_string(dataset.labels.size()) + " labels");
    }
    if (params.n_trees == 0) {
        throw ValidationError("n_trees must be at least 1");
    }
    if (params.min_samples_split < 2) {
        throw ValidationError("min_samples_split must be at least 2");
    }
    if (!dataset.layout) {
        throw ValidationError("dataset has no layout");
    }
    TrainingData data;
    data.n = dataset.size();
    data.dim = dataset.layout->total();
    data.x.reserve(data.n * data.dim);
    std::vector<bool> present(static_cast<std::size_t>(dataset.class_count), false);
    for (std::size_t i = 0; i < data.n; ++i) {
        const auto& row = dataset.rows[i];
        if (row.values.size() != data.dim) {
            throw ValidationError("row " + std::to_string(i) + " does not match the dataset layout");
        }
        data.x.insert(data.x.end(), row.values.begin(), row.values.end());
        const auto label = dataset.labels[i];
        if (label < 1 || label > dataset.class_count) {
            throw ValidationError("label " + std::to_string(label) + " outside 1.." +
                                  std::to_string(dataset.class_count));
        }
        data.y.push_back(label - 1);
        present[static_cast<std::size_t>(label - 1)] = true;
    }
    if (std::count(present.begin(), present.end(), true) < 2) {
        throw ValidationError("training data holds a single class");
    }
    if (data.dim == 0) {
        throw ValidationError("training rows are empty");
    }
    std::size_t mtry = params.features_per_split;
    if (mtry == 0) {
        mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(data.dim))));
    }
    if (mtry > data.dim) {
        throw ValidationError("features_per_split " + std::to_string(mtry) + " exceeds row width " +
                              std::to_string(data.dim));
    }

    std::vector<DecisionTree> trees(params.n_trees);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < trees.size(); t = next++) {
            TreeBuilder builder(data, dataset.class_count, params, mtry,
                                derive_seed(params.seed, "tree/" + std::to_string(t)));
            trees[t] = builder.build();
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(params.threads, static_cast<unsigned>(trees.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }

    ForestModel model(std::move(trees), dataset.class_count, data.dim, dataset.layout->fingerprint, params);
    const double acc = evaluate_accuracy(model, dataset);
    return ForestModel(model.trees(), model.class_count(), model.dim(), model.layout_fingerprint(), params, acc);
}

ClassDistribution predict_proba(const ForestModel& model, const FeatureRow& row) {
    if (!row.layout || row.layout->fingerprint != model.layout_fingerprint()) {
        throw ValidationError("row layout '" + (row.layout ? row.layout->fingerprint : std::string("none")) +
                              "' does not match model layout '" + model.layout_fingerprint() + "'");
    }
    return model.proba(row.values);
}

SalesClass argmax_class(const ClassDistribution& dist) {
    const auto it = std::max_element(dist.probs.begin(), dist.probs.end());
    return 1 + static_cast<SalesClass>(it - dist.probs.begin());
}

SalesClass predict(const ForestModel& model, const FeatureRow& row) { return argmax_class(predict_proba(model, row)); }

double prediction_score(const ClassDistribution& dist) {
    double s = 0.0;
    for (std::size_t i = 0; i < dist.probs.size(); ++i) {
        s += dist.probs[i] * static_cast<double>(i + 1);
    }
    return s;
}

double evaluate_accuracy(const ForestModel& model, const EncodedDataset& test) {
    if (test.size() == 0) {
        throw ValidationError("cannot evaluate on an empty dataset");
    }
    if (test.labels.size() != test.size()) {
        throw ValidationError("evaluation dataset lacks labels");
    }
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        wrong += predict(model, test.rows[i]) != test.labels[i];
    }
    return 1.0 - static_cast<double>(wrong) / static_cast<double>(test.size());
}

std::string serialize_model(const ForestModel& model) {
    json trees = json::array();
    for (const auto& t : model.trees()) {
        std::vector<std::int32_t> feature;
        std::vector<double> threshold;
        std::vector<std::uint32_t> left;
        std::vector<std::uint32_t> right;
        std::vector<std::uint32_t> offset;
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            offset.push_back(n.counts_offset);
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"counts_offset", offset},
                         {"counts", t.counts}});
    }
    json doc{{"params", params_json(model.params())},
             {"class_count", model.class_count()},
             {"dim", model.dim()},
             {"layout_fingerprint", model.layout_fingerprint()},
             {"seed", model.params().seed},
             {"train_accuracy", model.train_accuracy()},
             {"trees", std::move(trees)}};
    return std::string(kModelMagic) + " " + std::to_string(kModelVersion) + "\n" + doc.dump() + "\n";
}

ForestModel parse_model(std::string_view text) {
    const auto nl = text.find('\n');
    const auto first = text.substr(0, nl);
    if (!first.starts_with(kModelMagic)) {
        throw ValidationError("not a forest model file");
    }
    const auto version = std::string(first.substr(kModelMagic.size()));
    if (std::atoi(version.c_str()) != kModelVersion) {
        throw ValidationError("unsupported forest model version '" + version + "', expected " +
                              std::to_string(kModelVersion));
    }
    const auto doc = json::parse(text.substr(nl + 1));
    std::vector<DecisionTree> trees;
    for (const auto& jt : doc.at("trees")) {
        DecisionTree t;
        const auto feature = jt.at("feature").get<std::vector<std::int32_t>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<std::uint32_t>>();
        const auto right = jt.at("right").get<std::vector<std::uint32_t>>();
        const auto offset = jt.at("counts_offset").get<std::vector<std::uint32_t>>();
        if (threshold.size() != feature.size() || left.size() != feature.size() || right.size() != feature.size() ||
            offset.size() != feature.size()) {
            throw ValidationError("forest tree arrays have different lengths");
        }
        for (std::size_t i = 0; i < feature.size(); ++i) {
            t.nodes.push_back({feature[i], threshold[i], left[i], right[i], offset[i]});
        }
        t.counts = jt.at("counts").get<std::vector<std::uint32_t>>();
        trees.push_back(std::move(t));
    }
    return ForestModel(std::move(trees), doc.at("class_count").get<int>(), doc.at("dim").get<std::size_t>(),
                       doc.at("layout_fingerprint").get<std::string>(), params_from_json(doc.at("params")),
                       doc.at("train_accuracy").get<double>());
}

void save_model(const ForestModel& model, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_model(model));
}

ForestModel load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace trendlens
