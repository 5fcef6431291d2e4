#include "trendlens/corpus.hpp"

#include "trendlens/error.hpp"
#include "trendlens/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace trendlens {

namespace {

using json = nlohmann::json;

std::string record_label(std::size_t record, std::size_t line) {
    return "record " + std::to_string(record) + " (line " + std::to_string(line) + ")";
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

double parse_number(const std::string& text, const std::string& field, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw ValidationError("field '" + field + "' of " + where + " is not a finite number: '" + text + "'");
    }
    return v;
}

void check_product(const Product& p, const std::string& where) {
    if (p.id.empty()) {
        throw ValidationError("missing required field 'id' in " + where);
    }
    if (!(p.sales >= 0.0) || !std::isfinite(p.sales)) {
        throw ValidationError("negative sales " + format_g(p.sales) + " for id '" + p.id + "' in " + where);
    }
}

/// RFC 4180 style reader: quoted fields may contain delimiters, doubled quotes and newlines.
struct CsvRow {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

std::vector<CsvRow> read_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    row.line = 1;

    auto end_field = [&] {
        row.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        const bool blank = row.fields.size() == 1 && row.fields[0].empty();
        if (!blank) {
            rows.push_back(std::move(row));
        }
        row = CsvRow{};
        row.line = line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') {
                    ++line;
                }
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (field_started && !field.empty()) {
                throw ValidationError("csv parse error at line " + std::to_string(line) + ": stray quote");
            }
            quoted = true;
            field_started = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            break;
        case '\n':
            ++line;
            end_row();
            break;
        default:
            field.push_back(c);
            field_started = true;
        }
    }
    if (quoted) {
        throw ValidationError("csv parse error at line " + std::to_string(row.line) + ": unterminated quote");
    }
    if (field_started || !row.fields.empty()) {
        end_row();
    }
    return rows;
}

void reject_duplicates(const std::vector<Product>& products, const std::vector<std::string>& labels) {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < products.size(); ++i) {
        auto [it, inserted] = seen.emplace(products[i].id, i);
        if (!inserted) {
            throw ValidationError("duplicate id '" + products[i].id + "' in " + labels[it->second] + " and " +
                                  labels[i]);
        }
    }
}

}  // namespace

std::vector<double> Catalog::sales() const {
    std::vector<double> out;
    out.reserve(products.size());
    for (const auto& p : products) {
        out.push_back(p.sales);
    }
    return out;
}

void Catalog::validate() const {
    std::vector<std::string> labels;
    labels.reserve(products.size());
    for (std::size_t i = 0; i < products.size(); ++i) {
        labels.push_back("record " + std::to_string(i + 1));
        check_product(products[i], labels.back());
    }
    reject_duplicates(products, labels);
    for (const auto& p : products) {
        for (const auto& [name, value] : p.categoricals) {
            auto it = schema.categorical_levels.find(name);
            if (it == schema.categorical_levels.end() || !it->second.contains(value)) {
                throw ValidationError("product '" + p.id + "': value '" + value + "' of attribute '" + name +
                                      "' is not in the catalog schema");
            }
        }
        for (const auto& [name, value] : p.numerics) {
            if (!schema.numeric_names.contains(name)) {
                throw ValidationError("product '" + p.id + "': numeric attribute '" + name +
                                      "' is not in the catalog schema");
            }
            if (!std::isfinite(value)) {
                throw ValidationError("product '" + p.id + "': numeric attribute '" + name + "' is not finite");
            }
        }
    }
}

CatalogFormat parse_catalog_format(std::string_view name) {
    if (name == "jsonl") {
        return CatalogFormat::jsonl;
    }
    if (name == "csv") {
        return CatalogFormat::csv;
    }
    throw ValidationError("unknown catalog format '" + std::string(name) + "' (expected jsonl or csv)");
}

Schema infer_schema(std::span<const Product> products) {
    Schema schema;
    for (const auto& p : products) {
        for (const auto& [name, value] : p.categoricals) {
            schema.categorical_levels[name].insert(value);
        }
        for (const auto& [name, value] : p.numerics) {
            schema.numeric_names.insert(name);
        }
    }
    return schema;
}

Catalog make_catalog(std::vector<Product> products) {
    Catalog catalog;
    catalog.schema = infer_schema(products);
    catalog.products = std::move(products);
    catalog.validate();
    return catalog;
}

Catalog parse_catalog_jsonl(std::string_view text) {
    std::vector<Product> products;
    std::vector<std::string> labels;
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        const auto raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line;
        if (trim(raw).empty()) {
            if (nl == text.size()) {
                break;
            }
            continue;
        }
        const auto where = record_label(products.size() + 1, line);
        json obj;
        try {
            obj = json::parse(raw);
        } catch (const json::parse_error& e) {
            throw ValidationError("parse error in " + where + ": " + e.what());
        }
        if (!obj.is_object()) {
            throw ValidationError("parse error in " + where + ": expected a JSON object");
        }
        Product p;
        try {
            for (const char* required : {"id", "caption", "sales"}) {
                if (!obj.contains(required) || obj[required].is_null()) {
                    throw ValidationError("missing required field '" + std::string(required) + "' in " + where);
                }
            }
            p.id = obj.at("id").get<std::string>();
            p.caption = obj.at("caption").get<std::string>();
            if (!obj.at("sales").is_number()) {
                throw ValidationError("field 'sales' of " + where + " is not a number");
            }
            p.sales = obj.at("sales").get<double>();
            if (obj.contains("image_ref")) {
                p.image_ref = obj.at("image_ref").get<std::string>();
            }
            if (obj.contains("categoricals")) {
                for (const auto& [k, v] : obj.at("categoricals").items()) {
                    p.categoricals[k] = v.get<std::string>();
                }
            }
            if (obj.contains("numerics")) {
                for (const auto& [k, v] : obj.at("numerics").items()) {
                    if (!v.is_number()) {
                        throw ValidationError("numeric attribute '" + k + "' of " + where + " is not a number");
                    }
                    p.numerics[k] = v.get<double>();
                }
            }
        } catch (const json::exception& e) {
            throw ValidationError("malformed field in " + where + ": " + e.what());
        }
        check_product(p, where);
        products.push_back(std::move(p));
        labels.push_back(where);
        if (nl == text.size()) {
            break;
        }
    }
    reject_duplicates(products, labels);
    return make_catalog(std::move(products));
}

Catalog parse_catalog_csv(std::string_view text) {
    auto rows = read_csv(text);
    if (rows.empty()) {
        throw ValidationError("csv parse error: missing header row");
    }
    const auto& header = rows.front().fields;
    std::map<std::string, std::size_t> fixed;
    std::vector<std::pair<std::string, std::size_t>> cats;
    std::vector<std::pair<std::string, std::size_t>> nums;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = trim(header[i]);
        if (name.starts_with("cat:")) {
            cats.emplace_back(name.substr(4), i);
        } else if (name.starts_with("num:")) {
            nums.emplace_back(name.substr(4), i);
        } else {
            fixed[name] = i;
        }
    }
    for (const char* required : {"id", "caption", "sales"}) {
        if (!fixed.contains(required)) {
            throw ValidationError("missing required column '" + std::string(required) + "' in csv header");
        }
    }

    std::vector<Product> products;
    std::vector<std::string> labels;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        const auto where = record_label(r, rows[r].line);
        if (f.size() != header.size()) {
            throw ValidationError("parse error in " + where + ": expected " + std::to_string(header.size()) +
                                  " fields, found " + std::to_string(f.size()));
        }
        Product p;
        p.id = trim(f[fixed["id"]]);
        p.caption = f[fixed["caption"]];
        if (auto it = fixed.find("image_ref"); it != fixed.end()) {
            p.image_ref = trim(f[it->second]);
        }
        const auto sales_text = trim(f[fixed["sales"]]);
        if (sales_text.empty()) {
            throw ValidationError("missing required field 'sales' in " + where);
        }
        p.sales = parse_number(sales_text, "sales", where);
        for (const auto& [name, col] : cats) {
            auto value = trim(f[col]);
            if (!value.empty()) {
                p.categoricals[name] = std::move(value);
            }
        }
        for (const auto& [name, col] : nums) {
            const auto value = trim(f[col]);
            if (!value.empty()) {
                p.numerics[name] = parse_number(value, name, where);
            }
        }
        check_product(p, where);
        products.push_back(std::move(p));
        labels.push_back(where);
    }
    reject_duplicates(products, labels);
    return make_catalog(std::move(products));
}

Catalog load_catalog(const std::filesystem::path& path, CatalogFormat format) {
    const auto text = read_file(path);
    return format == CatalogFormat::jsonl ? parse_catalog_jsonl(text) : parse_catalog_csv(text);
}

std::string serialize_catalog_jsonl(const Catalog& catalog) {
    std::string out;
    for (const auto& p : catalog.products) {
        nlohmann::ordered_json obj;
        obj["id"] = p.id;
        obj["caption"] = p.caption;
        obj["image_ref"] = p.image_ref;
        obj["sales"] = p.sales;
        obj["categoricals"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : p.categoricals) {
            obj["categoricals"][k] = v;
        }
        obj["numerics"] = nlohmann::ordered_json::object();
        for (const auto& [k, v] : p.numerics) {
            obj["numerics"][k] = v;
        }
        out += obj.dump();
        out += '\n';
    }
    return out;
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_catalog_jsonl(catalog));
}

std::vector<double> minmax_normalize(std::span<const double> values) {
    if (values.empty()) {
        throw ValidationError("minmax_normalize: empty value list");
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo;
    const double range = *hi - min;
    std::vector<double> out(values.size(), 0.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            out[i] = (values[i] - min) / range;
        }
    }
    return out;
}

std::pair<Catalog, Catalog> split(const Catalog& catalog, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train fraction must lie in (0, 1), got " + format_g(train_fraction));
    }
    const std::size_t n = catalog.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    std::vector<bool> in_train(n, false);
    for (std::size_t i = 0; i < n_train; ++i) {
        in_train[order[i]] = true;
    }
    Catalog train{{}, catalog.schema};
    Catalog test{{}, catalog.schema};
    for (std::size_t i = 0; i < n; ++i) {
        (in_train[i] ? train : test).products.push_back(catalog.products[i]);
    }
    return {std::move(train), std::move(test)};
}

}  // namespace trendlens
