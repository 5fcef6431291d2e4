#pragma once

#include "trendlens/corpus.hpp"
#include "trendlens/labeler.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace trendlens {

using Vector = std::vector<double>;

/// Source of text and image embeddings. Implementations must return vectors of the declared
/// dimensions; `concurrent()` tells callers whether embed calls may overlap.
class EmbeddingProvider {
public:
    struct Item {
        std::string id;
        std::string payload;
    };

    virtual ~EmbeddingProvider() = default;

    virtual std::string name() const = 0;
    virtual std::size_t text_dim() const = 0;
    virtual std::size_t image_dim() const = 0;
    virtual bool concurrent() const { return true; }

    /// Identifies provider and dims; recorded by encoders so rows from different providers never mix.
    std::string fingerprint() const;

    virtual Vector embed_text(std::string_view id, std::string_view caption) = 0;
    virtual Vector embed_image(std::string_view id, std::string_view image_ref) = 0;

    virtual std::vector<Vector> embed_texts(std::span<const Item> items);
    virtual std::vector<Vector> embed_images(std::span<const Item> items);
};

/// Resolves an image reference to bytes: `data:` references carry their payload inline
/// (everything after the first comma, or after the scheme when there is none); anything else is a
/// file path. Missing files raise ValidationError naming the reference.
std::string resolve_image_bytes(std::string_view image_ref);

/// Deterministic, download-free provider. Text: signed feature hashing of token unigrams and
/// bigrams. Images: signed hashing of byte 4-grams. Both L2-normalized; empty input gives zeros.
class BuiltinEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit BuiltinEmbeddingProvider(std::size_t text_dim = 512, std::size_t image_dim = 512);

    std::string name() const override { return "builtin-hash-v1"; }
    std::size_t text_dim() const override { return text_dim_; }
    std::size_t image_dim() const override { return image_dim_; }

    Vector embed_text(std::string_view id, std::string_view caption) override;
    Vector embed_image(std::string_view id, std::string_view image_ref) override;

private:
    std::size_t text_dim_;
    std::size_t image_dim_;
};

/// Precomputed vectors keyed by product id, read from JSONL `{"id", "text": [...], "image": [...]}`.
class FileEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit FileEmbeddingProvider(const std::filesystem::path& path);

    std::string name() const override { return "file:" + source_; }
    std::size_t text_dim() const override { return text_dim_; }
    std::size_t image_dim() const override { return image_dim_; }

    Vector embed_text(std::string_view id, std::string_view caption) override;
    Vector embed_image(std::string_view id, std::string_view image_ref) override;

private:
    std::string source_;
    std::size_t text_dim_ = 0;
    std::size_t image_dim_ = 0;
    std::unordered_map<std::string, std::pair<Vector, Vector>> vectors_;
};

/// Client for the embedding service: probes `GET /health` on construction and sends
/// `POST /embed` requests in chunks of at most 64 items.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    static constexpr std::size_t kMaxBatch = 64;

    explicit RemoteEmbeddingProvider(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(60),
                                     int max_attempts = 3);

    std::string name() const override { return "remote:" + model_name_ + "@" + version_; }
    std::size_t text_dim() const override { return text_dim_; }
    std::size_t image_dim() const override { return image_dim_; }

    Vector embed_text(std::string_view id, std::string_view caption) override;
    Vector embed_image(std::string_view id, std::string_view image_ref) override;
    std::vector<Vector> embed_texts(std::span<const Item> items) override;
    std::vector<Vector> embed_images(std::span<const Item> items) override;

private:
    std::vector<Vector> embed_batch(std::string_view kind, std::span<const Item> items, std::size_t dim);

    std::string url_;
    std::chrono::milliseconds timeout_;
    int max_attempts_;
    std::string model_name_;
    std::string version_;
    std::size_t text_dim_ = 0;
    std::size_t image_dim_ = 0;
};

/// "builtin", "file:<path>" or "remote:<url>". For remote providers the TRENDLENS_EMBED_URL
/// environment variable, when set, replaces the URL.
std::unique_ptr<EmbeddingProvider> make_provider(std::string_view selection);

enum class ReducerMethod { pca, linear_autoencoder };

ReducerMethod parse_reducer_method(std::string_view name);
std::string_view to_string(ReducerMethod method) noexcept;

struct AutoencoderOptions {
    int epochs = 3000;
    double learning_rate = 0.01;
    std::uint64_t seed = 7;
};

/// Linear map x -> encoder * (x - mean) with a matching decoder. PCA takes the top-k
/// eigenvectors of the covariance; the linear autoencoder learns both maps by full-batch Adam
/// on the mean squared reconstruction error.
class Reducer {
public:
    Reducer() = default;

    static Reducer fit(std::span<const Vector> vectors, std::size_t k, ReducerMethod method,
                       const AutoencoderOptions& options = {});

    Vector transform(std::span<const double> x) const;
    Vector reconstruct(std::span<const double> x) const;
    /// Mean over samples of ||x - reconstruct(x)||^2.
    double reconstruction_error(std::span<const Vector> vectors) const;

    bool fitted() const noexcept { return encoder_.size() > 0; }
    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
    std::size_t output_dim() const noexcept { return static_cast<std::size_t>(encoder_.rows()); }
    ReducerMethod method() const noexcept { return method_; }
    /// Covariance eigenvalues in descending order (PCA only; empty for the autoencoder).
    const std::vector<double>& eigenvalues() const noexcept { return eigenvalues_; }

    nlohmann::json to_json() const;
    static Reducer from_json(const nlohmann::json& j);

private:
    ReducerMethod method_ = ReducerMethod::pca;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd encoder_;  // k x D
    Eigen::MatrixXd decoder_;  // D x k
    std::vector<double> eigenvalues_;
};

/// Indicator per (attribute, level) in schema order. An attribute whose value is not a schema
/// level contributes zeros; an attribute absent from the product is an error.
Vector onehot_encode(const Product& product, const Schema& schema);

struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
};

struct Layout {
    std::vector<Segment> segments;
    std::vector<std::string> columns;
    std::string fingerprint;

    std::size_t total() const noexcept { return columns.size(); }
    const Segment& segment(std::string_view name) const;
};

struct FeatureRow {
    Vector values;
    std::shared_ptr<const Layout> layout;
};

struct EncodedDataset {
    std::vector<std::string> ids;
    std::vector<FeatureRow> rows;
    std::vector<SalesClass> labels;
    int class_count = kDefaultClassCount;
    std::shared_ptr<const Layout> layout;
    std::string provider_fingerprint;
    nlohmann::json reducer;

    std::size_t size() const noexcept { return rows.size(); }
};

void save_dataset(const EncodedDataset& dataset, const std::filesystem::path& path);
std::string serialize_dataset(const EncodedDataset& dataset);
EncodedDataset parse_dataset(std::string_view bytes);
EncodedDataset load_dataset(const std::filesystem::path& path);

struct EncoderConfig {
    /// 0 drops the image segment entirely.
    std::size_t reduced_dim = 64;
    ReducerMethod method = ReducerMethod::pca;
    AutoencoderOptions autoencoder;
};

/// Turns products into rows laid out as onehot | numeric | text_embed | image_embed_reduced.
/// Numerics are z-scored with statistics of the catalog the encoder was fitted on.
class FeatureEncoder {
public:
    static FeatureEncoder fit(const Catalog& train, EmbeddingProvider& provider, const EncoderConfig& config = {});

    FeatureRow encode(const Product& product, EmbeddingProvider& provider) const;
    EncodedDataset encode_all(std::span<const Product> products, std::span<const SalesClass> labels, int class_count,
                              EmbeddingProvider& provider) const;

    const std::shared_ptr<const Layout>& layout() const noexcept { return layout_; }
    const Schema& schema() const noexcept { return schema_; }
    const Reducer& reducer() const noexcept { return reducer_; }
    const std::string& provider_fingerprint() const noexcept { return provider_fingerprint_; }

    nlohmann::json to_json() const;
    static FeatureEncoder from_json(const nlohmann::json& j);

private:
    void build_layout(std::size_t text_dim);
    void check_provider(const EmbeddingProvider& provider) const;
    FeatureRow assemble(const Product& product, const Vector& text, const Vector& image) const;

    Schema schema_;
    std::vector<double> numeric_mean_;
    std::vector<double> numeric_scale_;
    Reducer reducer_;
    std::size_t text_dim_ = 0;
    std::string provider_fingerprint_;
    std::shared_ptr<const Layout> layout_;
};

/// One-call form: onehot || numerics || text embedding || reduced image embedding.
FeatureRow assemble_row(const Product& product, EmbeddingProvider& provider, const FeatureEncoder& encoder);

}  // namespace trendlens
