#include "trendlens/encode.hpp"

#include "http_client.hpp"
#include "trendlens/error.hpp"
#include "trendlens/util.hpp"

#include <httplib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

namespace trendlens {

namespace {

using json = nlohmann::json;

void l2_normalize(Vector& v) {
    double norm = 0.0;
    for (double x : v) {
        norm += x * x;
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) {
            x /= norm;
        }
    }
}

void add_hashed(Vector& v, std::string_view feature) {
    const auto h = stable_hash(feature);
    const auto slot = static_cast<std::size_t>(h % v.size());
    v[slot] += (h >> 63) != 0 ? 1.0 : -1.0;
}

std::vector<std::string> text_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : text) {
        auto c = static_cast<unsigned char>(raw);
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<unsigned char>(c - 'A' + 'a');
        }
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-') {
            cur.push_back(static_cast<char>(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

Vector to_vector(const json& arr, std::string_view what) {
    if (!arr.is_array()) {
        throw ValidationError(std::string(what) + " is not an array");
    }
    Vector v;
    v.reserve(arr.size());
    for (const auto& x : arr) {
        if (!x.is_number()) {
            throw ValidationError(std::string(what) + " holds a non-numeric entry");
        }
        v.push_back(x.get<double>());
    }
    return v;
}

Eigen::MatrixXd stack(std::span<const Vector> vectors) {
    const auto n = static_cast<Eigen::Index>(vectors.size());
    const auto d = static_cast<Eigen::Index>(vectors.front().size());
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& v = vectors[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(v.size()) != d) {
            throw ValidationError("vectors have inconsistent dimensions");
        }
        m.row(i) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), d);
    }
    return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto& row = rows.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw ValidationError("reducer matrix has ragged rows");
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
        }
    }
    return m;
}

json layout_json(const Layout& layout) {
    json segs = json::array();
    for (const auto& s : layout.segments) {
        segs.push_back({{"name", s.name}, {"offset", s.offset}, {"length", s.length}});
    }
    return {{"segments", segs}, {"columns", layout.columns}, {"fingerprint", layout.fingerprint}};
}

Layout layout_from_json(const json& j) {
    Layout layout;
    for (const auto& s : j.at("segments")) {
        layout.segments.push_back(
            {s.at("name").get<std::string>(), s.at("offset").get<std::size_t>(), s.at("length").get<std::size_t>()});
    }
    layout.columns = j.at("columns").get<std::vector<std::string>>();
    layout.fingerprint = j.at("fingerprint").get<std::string>();
    return layout;
}

constexpr std::string_view kDatasetMagic = "TLDS";
constexpr std::uint32_t kDatasetVersion = 1;

static_assert(std::endian::native == std::endian::little, "dataset files are written in native little-endian order");

}  // namespace

std::string EmbeddingProvider::fingerprint() const {
    return name() + "/text" + std::to_string(text_dim()) + "/image" + std::to_string(image_dim());
}

std::vector<Vector> EmbeddingProvider::embed_texts(std::span<const Item> items) {
    std::vector<Vector> out;
    out.reserve(items.size());
    for (const auto& item : items) {
        out.push_back(embed_text(item.id, item.payload));
    }
    return out;
}

std::vector<Vector> EmbeddingProvider::embed_images(std::span<const Item> items) {
    std::vector<Vector> out;
    out.reserve(items.size());
    for (const auto& item : items) {
        out.push_back(embed_image(item.id, item.payload));
    }
    return out;
}

std::string resolve_image_bytes(std::string_view image_ref) {
    if (image_ref.starts_with("data:")) {
        const auto comma = image_ref.find(',');
        return std::string(comma == std::string_view::npos ? image_ref.substr(5) : image_ref.substr(comma + 1));
    }
    const std::filesystem::path path{std::string(image_ref)};
    std::error_code ec;
    if (image_ref.empty() || !std::filesystem::is_regular_file(path, ec)) {
        throw ValidationError("image not found: '" + std::string(image_ref) + "'");
    }
    return read_file(path);
}

BuiltinEmbeddingProvider::BuiltinEmbeddingProvider(std::size_t text_dim, std::size_t image_dim)
    : text_dim_(text_dim), image_dim_(image_dim) {
    if (text_dim == 0 || image_dim == 0) {
        throw ValidationError("embedding dimensions must be positive");
    }
}

Vector BuiltinEmbeddingProvider::embed_text(std::string_view, std::string_view caption) {
    Vector v(text_dim_, 0.0);
    const auto toks = text_tokens(caption);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        add_hashed(v, "u:" + toks[i]);
        if (i + 1 < toks.size()) {
            add_hashed(v, "b:" + toks[i] + " " + toks[i + 1]);
        }
    }
    l2_normalize(v);
    return v;
}

Vector BuiltinEmbeddingProvider::embed_image(std::string_view, std::string_view image_ref) {
    const auto bytes = resolve_image_bytes(image_ref);
    Vector v(image_dim_, 0.0);
    if (bytes.size() < 4) {
        if (!bytes.empty()) {
            add_hashed(v, bytes);
        }
    } else {
        for (std::size_t i = 0; i + 4 <= bytes.size(); ++i) {
            add_hashed(v, std::string_view(bytes).substr(i, 4));
        }
    }
    l2_normalize(v);
    return v;
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& path) : source_(path.filename().string()) {
    const auto text = read_file(path);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            nl = text.size();
        }
        const auto line = std::string_view(text).substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        const auto where = path.string() + ":" + std::to_string(line_no);
        json obj = json::parse(line, nullptr, false);
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("text") || !obj.contains("image")) {
            throw ValidationError("malformed embedding record at " + where);
        }
        auto t = to_vector(obj["text"], "text vector at " + where);
        auto im = to_vector(obj["image"], "image vector at " + where);
        if (vectors_.empty()) {
            text_dim_ = t.size();
            image_dim_ = im.size();
        }
        if (t.size() != text_dim_ || im.size() != image_dim_ || t.empty() || im.empty()) {
            throw ValidationError("embedding dimensions differ at " + where);
        }
        const auto id = obj["id"].get<std::string>();
        if (!vectors_.emplace(id, std::make_pair(std::move(t), std::move(im))).second) {
            throw ValidationError("duplicate embedding id '" + id + "' at " + where);
        }
    }
    if (vectors_.empty()) {
        throw ValidationError("embedding file '" + path.string() + "' holds no records");
    }
}

Vector FileEmbeddingProvider::embed_text(std::string_view id, std::string_view) {
    auto it = vectors_.find(std::string(id));
    if (it == vectors_.end()) {
        throw ValidationError("no precomputed embedding for product '" + std::string(id) + "'");
    }
    return it->second.first;
}

Vector FileEmbeddingProvider::embed_image(std::string_view id, std::string_view) {
    auto it = vectors_.find(std::string(id));
    if (it == vectors_.end()) {
        throw ValidationError("no precomputed embedding for product '" + std::string(id) + "'");
    }
    return it->second.second;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string url, std::chrono::milliseconds timeout, int max_attempts)
    : url_(std::move(url)), timeout_(timeout), max_attempts_(std::max(1, max_attempts)) {
    const auto [base, path] = detail::split_url(url_);
    httplib::Client client(base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    auto res = client.Get(detail::join_path(path, "/health"));
    if (!res) {
        throw TransportError("embedding service at " + url_ + " unreachable: " + httplib::to_string(res.error()), 1);
    }
    if (res->status != 200) {
        throw TransportError("embedding service at " + url_ + " not ready (HTTP " + std::to_string(res->status) + ")",
                             1, res->status);
    }
    const auto health = json::parse(res->body, nullptr, false);
    if (!health.is_object() || !health.contains("text_dim") || !health.contains("image_dim")) {
        throw TransportError("embedding service at " + url_ + " sent a malformed /health reply", 1, res->status);
    }
    model_name_ = health.value("model_name", std::string("unknown"));
    version_ = health.value("version", std::string("0"));
    text_dim_ = health["text_dim"].get<std::size_t>();
    image_dim_ = health["image_dim"].get<std::size_t>();
}

std::vector<Vector> RemoteEmbeddingProvider::embed_batch(std::string_view kind, std::span<const Item> items,
                                                         std::size_t dim) {
    std::vector<Vector> out;
    out.reserve(items.size());
    const auto [base, path] = detail::split_url(url_);
    httplib::Client client(base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);

    for (std::size_t start = 0; start < items.size(); start += kMaxBatch) {
        const auto chunk = items.subspan(start, std::min(kMaxBatch, items.size() - start));
        json request{{"kind", kind}, {"items", json::array()}};
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            // positional ids keep the request's ids unique even if product ids repeat
            request["items"].push_back({{"id", std::to_string(i)}, {"payload", chunk[i].payload}});
        }
        const auto body = request.dump();

        std::string last_error;
        int last_status = 0;
        int attempt = 0;
        bool done = false;
        while (!done && attempt < max_attempts_) {
            ++attempt;
            auto res = client.Post(detail::join_path(path, "/embed"), body, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                last_status = 0;
            } else if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
                last_status = res->status;
                if (res->status >= 400 && res->status < 500) {
                    break;
                }
            } else {
                const auto reply = json::parse(res->body, nullptr, false);
                if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array()) {
                    last_error = "malformed /embed reply";
                    last_status = res->status;
                    break;
                }
                std::vector<Vector> got(chunk.size());
                std::vector<bool> seen(chunk.size(), false);
                for (const auto& entry : reply["vectors"]) {
                    const auto idx = std::stoul(entry.at("id").get<std::string>());
                    if (idx >= chunk.size() || seen[idx]) {
                        throw TransportError("embedding service answered an unknown or repeated id", attempt,
                                             res->status);
                    }
                    got[idx] = to_vector(entry.at("vector"), "remote vector");
                    if (got[idx].size() != dim) {
                        throw TransportError("embedding service returned dim " + std::to_string(got[idx].size()) +
                                                 ", expected " + std::to_string(dim),
                                             attempt, res->status);
                    }
                    seen[idx] = true;
                }
                if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
                    throw TransportError("embedding service left request ids unanswered", attempt, res->status);
                }
                for (auto& v : got) {
                    out.push_back(std::move(v));
                }
                done = true;
            }
            if (!done && attempt < max_attempts_) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
            }
        }
        if (!done) {
            throw TransportError("embedding request to " + url_ + " failed after " + std::to_string(attempt) +
                                     " attempt(s): " + last_error,
                                 attempt, last_status);
        }
    }
    return out;
}

Vector RemoteEmbeddingProvider::embed_text(std::string_view id, std::string_view caption) {
    const Item item{std::string(id), std::string(caption)};
    return std::move(embed_texts(std::span(&item, 1)).front());
}

Vector RemoteEmbeddingProvider::embed_image(std::string_view id, std::string_view image_ref) {
    const Item item{std::string(id), std::string(image_ref)};
    return std::move(embed_images(std::span(&item, 1)).front());
}

std::vector<Vector> RemoteEmbeddingProvider::embed_texts(std::span<const Item> items) {
    return embed_batch("text", items, text_dim_);
}

std::vector<Vector> RemoteEmbeddingProvider::embed_images(std::span<const Item> items) {
    std::vector<Item> encoded;
    encoded.reserve(items.size());
    for (const auto& item : items) {
        const auto bytes = resolve_image_bytes(item.payload);
        encoded.push_back(
            {item.id, base64_encode(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()))});
    }
    return embed_batch("image", encoded, image_dim_);
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view selection) {
    if (selection == "builtin") {
        return std::make_unique<BuiltinEmbeddingProvider>();
    }
    if (selection.starts_with("file:")) {
        return std::make_unique<FileEmbeddingProvider>(std::filesystem::path(std::string(selection.substr(5))));
    }
    if (selection.starts_with("remote:") || selection == "remote") {
        std::string url = selection.size() > 7 ? std::string(selection.substr(7)) : std::string{};
        if (const char* env = std::getenv("TRENDLENS_EMBED_URL"); env != nullptr && *env != '\0') {
            url = env;
        }
        if (url.empty()) {
            throw ValidationError("remote provider needs a URL (remote:<url> or TRENDLENS_EMBED_URL)");
        }
        return std::make_unique<RemoteEmbeddingProvider>(url);
    }
    throw ValidationError("unknown embedding provider '" + std::string(selection) +
                          "' (expected builtin, file:<path> or remote:<url>)");
}

ReducerMethod parse_reducer_method(std::string_view name) {
    if (name == "pca") {
        return ReducerMethod::pca;
    }
    if (name == "linear_autoencoder" || name == "linear-autoencoder" || name == "autoencoder") {
        return ReducerMethod::linear_autoencoder;
    }
    throw ValidationError("unknown reducer '" + std::string(name) + "' (expected pca or linear_autoencoder)");
}

std::string_view to_string(ReducerMethod method) noexcept {
    return method == ReducerMethod::pca ? "pca" : "linear_autoencoder";
}

Reducer Reducer::fit(std::span<const Vector> vectors, std::size_t k, ReducerMethod method,
                     const AutoencoderOptions& options) {
    if (vectors.empty()) {
        throw ValidationError("reducer needs at least one vector");
    }
    const std::size_t dim = vectors.front().size();
    if (k == 0 || k >= dim) {
        throw ValidationError("reduced dimension " + std::to_string(k) + " must lie in [1, " +
                              std::to_string(dim) + ")");
    }
    if (vectors.size() < k + 1) {
        throw ValidationError("reducer to " + std::to_string(k) + " dims needs at least " + std::to_string(k + 1) +
                              " vectors, got " + std::to_string(vectors.size()));
    }
    Eigen::MatrixXd x = stack(vectors);
    Reducer r;
    r.method_ = method;
    r.mean_ = x.colwise().mean().transpose();
    x.rowwise() -= r.mean_.transpose();
    const double n = static_cast<double>(x.rows());
    if (x.squaredNorm() == 0.0) {
        throw ValidationError("reducer inputs are all identical");
    }
    const auto kk = static_cast<Eigen::Index>(k);

    if (method == ReducerMethod::pca) {
        const Eigen::MatrixXd cov = (x.transpose() * x) / n;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
        if (solver.info() != Eigen::Success) {
            throw std::runtime_error("eigen decomposition failed");
        }
        const auto& vals = solver.eigenvalues();
        const auto d = vals.size();
        r.eigenvalues_.resize(static_cast<std::size_t>(d));
        for (Eigen::Index i = 0; i < d; ++i) {
            r.eigenvalues_[static_cast<std::size_t>(i)] = vals(d - 1 - i);
        }
        // eigenvalues ascend, so the leading components sit in the last columns
        Eigen::MatrixXd top = solver.eigenvectors().rightCols(kk).rowwise().reverse();
        for (Eigen::Index c = 0; c < kk; ++c) {
            // fix the sign so the largest-magnitude loading is positive
            Eigen::Index arg = 0;
            top.col(c).cwiseAbs().maxCoeff(&arg);
            if (top(arg, c) < 0) {
                top.col(c) *= -1.0;
            }
        }
        r.decoder_ = top;
        r.encoder_ = top.transpose();
        return r;
    }

    // Linear autoencoder trained with full-batch Adam on mean ||x - D E x||^2.
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    Eigen::MatrixXd enc(kk, static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < enc.size(); ++i) {
        enc.data()[i] = init(rng);
    }
    Eigen::MatrixXd dec = enc.transpose();
    Eigen::MatrixXd m_e = Eigen::MatrixXd::Zero(enc.rows(), enc.cols());
    Eigen::MatrixXd v_e = m_e;
    Eigen::MatrixXd m_d = Eigen::MatrixXd::Zero(dec.rows(), dec.cols());
    Eigen::MatrixXd v_d = m_d;
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-12;
    const double scale = std::sqrt(x.squaredNorm() / n);
    const double lr = options.learning_rate * scale / std::sqrt(static_cast<double>(dim));
    double b1t = 1.0;
    double b2t = 1.0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        const Eigen::MatrixXd z = x * enc.transpose();    // n x k
        const Eigen::MatrixXd resid = z * dec.transpose() - x;  // n x D
        const Eigen::MatrixXd g_d = (2.0 / n) * resid.transpose() * z;
        const Eigen::MatrixXd g_e = (2.0 / n) * (resid * dec).transpose() * x;
        b1t *= beta1;
        b2t *= beta2;
        m_e = beta1 * m_e + (1 - beta1) * g_e;
        v_e = beta2 * v_e + (1 - beta2) * g_e.cwiseAbs2();
        m_d = beta1 * m_d + (1 - beta1) * g_d;
        v_d = beta2 * v_d + (1 - beta2) * g_d.cwiseAbs2();
        enc.array() -= lr * (m_e.array() / (1 - b1t)) / ((v_e.array() / (1 - b2t)).sqrt() + eps);
        dec.array() -= lr * (m_d.array() / (1 - b1t)) / ((v_d.array() / (1 - b2t)).sqrt() + eps);
    }
    r.encoder_ = enc;
    r.decoder_ = dec;
    return r;
}

Vector Reducer::transform(std::span<const double> x) const {
    if (!fitted()) {
        throw ValidationError("reducer used before fit");
    }
    if (x.size() != input_dim()) {
        throw ValidationError("reducer expects dim " + std::to_string(input_dim()) + ", got " +
                              std::to_string(x.size()));
    }
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd z = encoder_ * (v - mean_);
    return {z.data(), z.data() + z.size()};
}

Vector Reducer::reconstruct(std::span<const double> x) const {
    const auto z = transform(x);
    const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(z.size()));
    const Eigen::VectorXd back = decoder_ * zv + mean_;
    return {back.data(), back.data() + back.size()};
}

double Reducer::reconstruction_error(std::span<const Vector> vectors) const {
    if (vectors.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& v : vectors) {
        const auto back = reconstruct(v);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = v[i] - back[i];
            total += d * d;
        }
    }
    return total / static_cast<double>(vectors.size());
}

json Reducer::to_json() const {
    return {{"method", to_string(method_)},
            {"input_dim", input_dim()},
            {"output_dim", output_dim()},
            {"mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
            {"encoder", matrix_json(encoder_)},
            {"decoder", matrix_json(decoder_)},
            {"eigenvalues", eigenvalues_}};
}

Reducer Reducer::from_json(const json& j) {
    Reducer r;
    r.method_ = parse_reducer_method(j.at("method").get<std::string>());
    const auto mean = j.at("mean").get<std::vector<double>>();
    r.mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    const auto in = static_cast<Eigen::Index>(j.at("input_dim").get<std::size_t>());
    const auto out = static_cast<Eigen::Index>(j.at("output_dim").get<std::size_t>());
    r.encoder_ = matrix_from_json(j.at("encoder"), in);
    r.decoder_ = matrix_from_json(j.at("decoder"), out);
    r.eigenvalues_ = j.at("eigenvalues").get<std::vector<double>>();
    if (r.encoder_.rows() != out || r.decoder_.rows() != in || r.mean_.size() != in) {
        throw ValidationError("reducer parameters have inconsistent shapes");
    }
    return r;
}

Vector onehot_encode(const Product& product, const Schema& schema) {
    Vector out;
    for (const auto& [name, levels] : schema.categorical_levels) {
        auto it = product.categoricals.find(name);
        if (it == product.categoricals.end()) {
            throw ValidationError("product '" + product.id + "' lacks categorical attribute '" + name + "'");
        }
        for (const auto& level : levels) {
            out.push_back(level == it->second ? 1.0 : 0.0);
        }
    }
    return out;
}

const Segment& Layout::segment(std::string_view name) const {
    for (const auto& s : segments) {
        if (s.name == name) {
            return s;
        }
    }
    throw ValidationError("layout has no segment '" + std::string(name) + "'");
}

std::string serialize_dataset(const EncodedDataset& dataset) {
    if (!dataset.layout) {
        throw ValidationError("dataset has no layout");
    }
    const std::size_t dim = dataset.layout->total();
    json header{{"ids", dataset.ids},
                {"labels", dataset.labels},
                {"class_count", dataset.class_count},
                {"layout", layout_json(*dataset.layout)},
                {"provider", dataset.provider_fingerprint},
                {"reducer", dataset.reducer},
                {"rows", dataset.rows.size()}};
    const auto text = header.dump();
    std::string out(kDatasetMagic);
    auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
    put(&kDatasetVersion, sizeof kDatasetVersion);
    const std::uint64_t len = text.size();
    put(&len, sizeof len);
    out += text;
    for (const auto& row : dataset.rows) {
        if (row.values.size() != dim) {
            throw ValidationError("row width " + std::to_string(row.values.size()) + " does not match layout " +
                                  std::to_string(dim));
        }
        put(row.values.data(), dim * sizeof(double));
    }
    return out;
}

void save_dataset(const EncodedDataset& dataset, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_dataset(dataset));
}

EncodedDataset parse_dataset(std::string_view bytes) {
    const std::size_t fixed = kDatasetMagic.size() + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes.size() < fixed || bytes.substr(0, kDatasetMagic.size()) != kDatasetMagic) {
        throw ValidationError("not an encoded dataset file");
    }
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 4, sizeof version);
    if (version != kDatasetVersion) {
        throw ValidationError("unsupported dataset version " + std::to_string(version));
    }
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + 8, sizeof len);
    if (bytes.size() < fixed + len) {
        throw ValidationError("truncated dataset header");
    }
    const auto header = json::parse(bytes.substr(fixed, len));
    EncodedDataset ds;
    ds.ids = header.at("ids").get<std::vector<std::string>>();
    ds.labels = header.at("labels").get<std::vector<SalesClass>>();
    ds.class_count = header.at("class_count").get<int>();
    ds.layout = std::make_shared<const Layout>(layout_from_json(header.at("layout")));
    ds.provider_fingerprint = header.at("provider").get<std::string>();
    ds.reducer = header.at("reducer");
    const auto n = header.at("rows").get<std::size_t>();
    const std::size_t dim = ds.layout->total();
    if (bytes.size() != fixed + len + n * dim * sizeof(double)) {
        throw ValidationError("dataset payload size does not match its header");
    }
    const char* p = bytes.data() + fixed + len;
    ds.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        FeatureRow row{Vector(dim), ds.layout};
        std::memcpy(row.values.data(), p, dim * sizeof(double));
        p += dim * sizeof(double);
        ds.rows.push_back(std::move(row));
    }
    return ds;
}

EncodedDataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

FeatureEncoder FeatureEncoder::fit(const Catalog& train, EmbeddingProvider& provider, const EncoderConfig& config) {
    if (train.empty()) {
        throw ValidationError("encoder needs a non-empty training catalog");
    }
    FeatureEncoder enc;
    enc.schema_ = train.schema;
    enc.text_dim_ = provider.text_dim();
    enc.provider_fingerprint_ = provider.fingerprint();

    const double n = static_cast<double>(train.size());
    for (const auto& name : train.schema.numeric_names) {
        double sum = 0.0;
        double sq = 0.0;
        for (const auto& p : train.products) {
            auto it = p.numerics.find(name);
            if (it == p.numerics.end()) {
                throw ValidationError("product '" + p.id + "' lacks numeric attribute '" + name + "'");
            }
            sum += it->second;
            sq += it->second * it->second;
        }
        const double mean = sum / n;
        const double var = std::max(0.0, sq / n - mean * mean);
        enc.numeric_mean_.push_back(mean);
        enc.numeric_scale_.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
    }

    if (config.reduced_dim > 0) {
        std::vector<EmbeddingProvider::Item> items;
        items.reserve(train.size());
        for (const auto& p : train.products) {
            items.push_back({p.id, p.image_ref});
        }
        const auto images = provider.embed_images(items);
        enc.reducer_ = Reducer::fit(images, config.reduced_dim, config.method, config.autoencoder);
    }
    enc.build_layout(enc.text_dim_);
    return enc;
}

void FeatureEncoder::build_layout(std::size_t text_dim) {
    Layout layout;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t length) {
        layout.segments.push_back({std::move(name), offset, length});
        offset += length;
    };
    for (const auto& [name, levels] : schema_.categorical_levels) {
        for (const auto& level : levels) {
            layout.columns.push_back("cat:" + name + "=" + level);
        }
    }
    add("onehot", layout.columns.size());
    for (const auto& name : schema_.numeric_names) {
        layout.columns.push_back("num:" + name);
    }
    add("numeric", schema_.numeric_names.size());
    for (std::size_t i = 0; i < text_dim; ++i) {
        layout.columns.push_back("text:" + std::to_string(i));
    }
    add("text_embed", text_dim);
    for (std::size_t i = 0; i < reducer_.output_dim(); ++i) {
        layout.columns.push_back("image:" + std::to_string(i));
    }
    add("image_embed_reduced", reducer_.output_dim());

    json desc{{"columns", layout.columns}, {"provider", provider_fingerprint_}};
    layout.fingerprint = sha256_hex(desc.dump()).substr(0, 16);
    layout_ = std::make_shared<const Layout>(std::move(layout));
}

void FeatureEncoder::check_provider(const EmbeddingProvider& provider) const {
    if (provider.fingerprint() != provider_fingerprint_) {
        throw ValidationError("encoder was fitted with provider '" + provider_fingerprint_ + "' but got '" +
                              provider.fingerprint() + "'");
    }
}

FeatureRow FeatureEncoder::assemble(const Product& product, const Vector& text, const Vector& image) const {
    FeatureRow row{onehot_encode(product, schema_), layout_};
    std::size_t i = 0;
    for (const auto& name : schema_.numeric_names) {
        auto it = product.numerics.find(name);
        if (it == product.numerics.end()) {
            throw ValidationError("product '" + product.id + "' lacks numeric attribute '" + name + "'");
        }
        row.values.push_back((it->second - numeric_mean_[i]) / numeric_scale_[i]);
        ++i;
    }
    if (text.size() != text_dim_) {
        throw ValidationError("text embedding has dim " + std::to_string(text.size()) + ", expected " +
                              std::to_string(text_dim_));
    }
    row.values.insert(row.values.end(), text.begin(), text.end());
    if (reducer_.fitted()) {
        const auto reduced = reducer_.transform(image);
        row.values.insert(row.values.end(), reduced.begin(), reduced.end());
    }
    return row;
}

FeatureRow FeatureEncoder::encode(const Product& product, EmbeddingProvider& provider) const {
    check_provider(provider);
    const auto text = provider.embed_text(product.id, product.caption);
    const auto image = reducer_.fitted() ? provider.embed_image(product.id, product.image_ref) : Vector{};
    return assemble(product, text, image);
}

EncodedDataset FeatureEncoder::encode_all(std::span<const Product> products, std::span<const SalesClass> labels,
                                          int class_count, EmbeddingProvider& provider) const {
    check_provider(provider);
    if (!labels.empty() && labels.size() != products.size()) {
        throw ValidationError("label count does not match product count");
    }
    std::vector<EmbeddingProvider::Item> texts;
    std::vector<EmbeddingProvider::Item> images;
    for (const auto& p : products) {
        texts.push_back({p.id, p.caption});
        images.push_back({p.id, p.image_ref});
    }
    const auto text_vecs = provider.embed_texts(texts);
    const auto image_vecs = reducer_.fitted() ? provider.embed_images(images) : std::vector<Vector>(products.size());

    EncodedDataset ds;
    ds.class_count = class_count;
    ds.layout = layout_;
    ds.provider_fingerprint = provider_fingerprint_;
    ds.reducer = reducer_.fitted() ? json{{"method", to_string(reducer_.method())},
                                          {"input_dim", reducer_.input_dim()},
                                          {"output_dim", reducer_.output_dim()}}
                                   : json(nullptr);
    for (std::size_t i = 0; i < products.size(); ++i) {
        ds.ids.push_back(products[i].id);
        ds.rows.push_back(assemble(products[i], text_vecs[i], image_vecs[i]));
    }
    ds.labels.assign(labels.begin(), labels.end());
    return ds;
}

json FeatureEncoder::to_json() const {
    json levels = json::object();
    for (const auto& [name, set] : schema_.categorical_levels) {
        levels[name] = std::vector<std::string>(set.begin(), set.end());
    }
    return {{"format", "trendlens-encoder/1"},
            {"categorical_levels", levels},
            {"numeric_names", std::vector<std::string>(schema_.numeric_names.begin(), schema_.numeric_names.end())},
            {"numeric_mean", numeric_mean_},
            {"numeric_scale", numeric_scale_},
            {"text_dim", text_dim_},
            {"provider", provider_fingerprint_},
            {"reducer", reducer_.fitted() ? reducer_.to_json() : json(nullptr)},
            {"layout_fingerprint", layout_->fingerprint}};
}

FeatureEncoder FeatureEncoder::from_json(const json& j) {
    if (j.value("format", std::string{}) != "trendlens-encoder/1") {
        throw ValidationError("unsupported encoder format");
    }
    FeatureEncoder enc;
    for (const auto& [name, levels] : j.at("categorical_levels").items()) {
        auto list = levels.get<std::vector<std::string>>();
        enc.schema_.categorical_levels[name] = {list.begin(), list.end()};
    }
    for (const auto& name : j.at("numeric_names").get<std::vector<std::string>>()) {
        enc.schema_.numeric_names.insert(name);
    }
    enc.numeric_mean_ = j.at("numeric_mean").get<std::vector<double>>();
    enc.numeric_scale_ = j.at("numeric_scale").get<std::vector<double>>();
    enc.text_dim_ = j.at("text_dim").get<std::size_t>();
    enc.provider_fingerprint_ = j.at("provider").get<std::string>();
    if (!j.at("reducer").is_null()) {
        enc.reducer_ = Reducer::from_json(j.at("reducer"));
    }
    enc.build_layout(enc.text_dim_);
    if (enc.layout_->fingerprint != j.at("layout_fingerprint").get<std::string>()) {
        throw ValidationError("encoder layout fingerprint mismatch");
    }
    return enc;
}

FeatureRow assemble_row(const Product& product, EmbeddingProvider& provider, const FeatureEncoder& encoder) {
    return encoder.encode(product, provider);
}

}  // namespace trendlens
