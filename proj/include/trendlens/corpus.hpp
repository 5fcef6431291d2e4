#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace trendlens {

/// One catalog item: caption, tabular attributes, image locator and raw sales.
struct Product {
    std::string id;
    std::string caption;
    std::string image_ref;
    std::map<std::string, std::string> categoricals;
    std::map<std::string, double> numerics;
    double sales = 0.0;

    bool operator==(const Product&) const = default;
};

/// Declared attribute names; categorical levels are kept sorted so one-hot layouts are stable.
struct Schema {
    std::map<std::string, std::set<std::string>> categorical_levels;
    std::set<std::string> numeric_names;

    bool operator==(const Schema&) const = default;
};

struct Catalog {
    std::vector<Product> products;
    Schema schema;

    std::size_t size() const noexcept { return products.size(); }
    bool empty() const noexcept { return products.empty(); }

    /// Raw sales in catalog order (the global sales set).
    std::vector<double> sales() const;

    /// Throws ValidationError on empty/duplicate ids, negative sales or values outside the schema.
    void validate() const;
};

enum class CatalogFormat { jsonl, csv };

CatalogFormat parse_catalog_format(std::string_view name);

/// Schema covering every attribute and level observed in `products`.
Schema infer_schema(std::span<const Product> products);

/// Builds a catalog with an inferred schema and validates it.
Catalog make_catalog(std::vector<Product> products);

Catalog load_catalog(const std::filesystem::path& path, CatalogFormat format);
Catalog parse_catalog_jsonl(std::string_view text);
Catalog parse_catalog_csv(std::string_view text);

/// One JSON object per line, keys in the order id, caption, image_ref, sales, categoricals, numerics.
std::string serialize_catalog_jsonl(const Catalog& catalog);
void save_catalog(const Catalog& catalog, const std::filesystem::path& path);

/// (v - min) / (max - min); a constant list maps to all zeros.
std::vector<double> minmax_normalize(std::span<const double> values);

/// Seeded random partition; the train part holds round(train_fraction * n) products.
/// Both parts keep the input's relative order.
std::pair<Catalog, Catalog> split(const Catalog& catalog, double train_fraction, std::uint64_t seed);

}  // namespace trendlens
