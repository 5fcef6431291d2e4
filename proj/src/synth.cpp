#include "trendlens/synth.hpp"

#include "trendlens/captions.hpp"
#include "trendlens/error.hpp"
#include "trendlens/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

namespace trendlens {
namespace {

using nlohmann::json;

struct VocabEntry {
    const char* canonical;
    const char* variant;  // reordered synonym or nullptr
};

// Ordered from most to least desirable; presets assign effects by position.
constexpr VocabEntry kVocabulary[] = {
    {"folded cuffs", nullptr},
    {"light vintage wash", "vintage light wash"},
    {"three zipped pockets", nullptr},
    {"short raglan sleeve", "raglan short sleeve"},
    {"adjustable inner drawstring waist", "inner adjustable drawstring waist"},
    {"relaxed fit", nullptr},
    {"cable knit", nullptr},
    {"zip and hook fastening", "hook and zip fastening"},
    {"patch pockets", nullptr},
    {"ribbed hem", nullptr},
    {"button and loop closure", "loop and button closure"},
    {"high neck", nullptr},
    {"wrap front", nullptr},
    {"dropped shoulders", nullptr},
    {"tie belt", nullptr},
    {"chest pocket", nullptr},
    {"black and white stripes", "white and black stripes"},
    {"elasticated waistband", nullptr},
    {"side slits", nullptr},
    {"v-neck", nullptr},
    {"contrast stitching", nullptr},
    {"quilted lining", nullptr},
    {"square neckline", nullptr},
    {"button cuffs", nullptr},
    {"cropped length", nullptr},
    {"puff sleeves", nullptr},
    {"logo print", nullptr},
    {"lace trim", nullptr},
    {"tiered skirt", nullptr},
    {"double-breasted front", nullptr},
    {"smocked bodice", nullptr},
    {"crochet panel", nullptr},
    {"satin finish", nullptr},
    {"balloon sleeves", nullptr},
    {"faux fur hood", nullptr},
    {"ruffle collar", nullptr},
    {"metallic thread", nullptr},
    {"frayed hem", nullptr},
    {"distressed detail", nullptr},
    {"stripped finish", nullptr},
};

constexpr const char* kProductTypes[] = {
    "dress",  "jumper",   "cardigan", "jeans",    "skirt",    "blouse",  "t-shirt",  "coat",
    "jacket", "trousers", "shorts",   "hoodie",   "shirt",    "vest",    "blazer",   "jumpsuit",
    "leggings", "tunic",  "parka",    "poncho",   "bodysuit", "camisole", "chinos",  "gilet",
};

std::vector<PlantedLevel> levels(std::initializer_list<const char*> names) {
    std::vector<PlantedLevel> out;
    for (const char* n : names) {
        out.push_back({n, 0.0});
    }
    return out;
}

// Attribute names follow a typical fashion retail catalog.
std::map<std::string, std::vector<PlantedLevel>> base_categoricals() {
    std::map<std::string, std::vector<PlantedLevel>> c;
    c["product_family"] = levels({"apparel", "knitwear", "denim", "outerwear"});
    c["product_category"] = levels({"tops", "bottoms", "one-piece", "layers"});
    std::vector<PlantedLevel> types;
    for (const char* t : kProductTypes) {
        types.push_back({t, 0.0});
    }
    c["product_type"] = types;
    c["color_family"] = levels({"neutral", "dark", "bright", "pastel"});
    c["color_intensity"] = levels({"light", "medium", "deep"});
    c["fabric"] = levels({"cotton", "wool", "polyester", "linen", "viscose"});
    c["fabric_weight"] = levels({"light", "mid", "heavy"});
    c["fashion_degree"] = levels({"basic", "trend", "statement"});
    c["fit"] = levels({"slim", "regular", "loose"});
    c["length"] = levels({"short", "regular", "long"});
    c["neckline"] = levels({"crew", "collar", "v", "none"});
    c["sleeve_length"] = levels({"sleeveless", "short", "long"});
    c["pattern"] = levels({"plain", "print", "stripe", "check"});
    c["season"] = levels({"spring", "summer", "autumn", "winter"});
    c["gender"] = levels({"women", "men", "unisex"});
    c["age_group"] = levels({"teen", "adult"});
    c["collection"] = levels({"core", "capsule", "collab"});
    c["origin"] = levels({"domestic", "import"});
    c["closure"] = levels({"none", "buttons", "zip"});
    c["care"] = levels({"machine", "hand", "dry"});
    c["price_band"] = levels({"entry", "mid", "premium"});
    c["brand_line"] = levels({"main", "studio", "basics"});
    return c;
}

std::vector<std::string> base_numerics() {
    return {"listed_price", "product_cost",    "lifecycle",     "number_of_sizes", "number_of_colors",
            "weight_grams", "stock_units",     "store_count",   "discount_rate",   "margin_rate",
            "lead_time_days", "return_rate",   "photo_count"};
}

std::vector<PlantedFeature> vocabulary(double top_effect, double bottom_effect) {
    std::vector<PlantedFeature> out;
    const auto n = std::size(kVocabulary);
    for (std::size_t i = 0; i < n; ++i) {
        PlantedFeature f;
        f.canonical = kVocabulary[i].canonical;
        f.variants.push_back(f.canonical);
        if (kVocabulary[i].variant != nullptr) {
            f.variants.emplace_back(kVocabulary[i].variant);
        }
        const double t = static_cast<double>(i) / static_cast<double>(n - 1);
        f.effect = top_effect + t * (bottom_effect - top_effect);
        out.push_back(std::move(f));
    }
    return out;
}

void set_effects(std::vector<PlantedLevel>& lv, std::initializer_list<double> effects) {
    std::size_t i = 0;
    for (double e : effects) {
        lv.at(i++).effect = e;
    }
}

std::string title_case(std::string s) {
    bool start = true;
    for (auto& ch : s) {
        if (start && std::isalpha(static_cast<unsigned char>(ch))) {
            ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        }
        start = ch == ' ' || ch == '-';
    }
    return s;
}

// Normal CDF.
double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

void SynthSpec::validate() const {
    if (n_products < 9) {
        throw ValidationError("synthetic catalog needs at least 9 products (3 per class), got " +
                              std::to_string(n_products));
    }
    if (features.empty()) {
        throw ValidationError("synthetic catalog needs at least one planted feature");
    }
    if (min_features > max_features) {
        throw ValidationError("min_features exceeds max_features");
    }
    if (max_features > features.size()) {
        throw ValidationError("max_features (" + std::to_string(max_features) + ") exceeds the number of planted "
                              "features (" + std::to_string(features.size()) + ")");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma) || !std::isfinite(base_sales)) {
        throw ValidationError("noise_sigma must be finite and non-negative, base_sales finite");
    }
    std::set<std::string> seen;
    for (const auto& f : features) {
        if (f.canonical.empty() || clean_caption(f.canonical) != std::vector<std::string>{f.canonical}) {
            throw ValidationError("planted feature '" + f.canonical + "' is not a clean caption phrase");
        }
        if (std::find(f.variants.begin(), f.variants.end(), f.canonical) == f.variants.end()) {
            throw ValidationError("planted feature '" + f.canonical + "' must list itself among its variants");
        }
        if (!std::isfinite(f.effect)) {
            throw ValidationError("planted feature '" + f.canonical + "' has a non-finite effect");
        }
        for (const auto& v : f.variants) {
            if (clean_caption(v) != std::vector<std::string>{v}) {
                throw ValidationError("variant '" + v + "' is not a clean caption phrase");
            }
            if (!seen.insert(v).second) {
                throw ValidationError("variant '" + v + "' appears more than once");
            }
        }
    }
    for (const auto& [attr, lv] : categoricals) {
        if (lv.empty()) {
            throw ValidationError("categorical '" + attr + "' has no levels");
        }
    }
    if (!type_attribute.empty() && !categoricals.contains(type_attribute)) {
        throw ValidationError("type attribute '" + type_attribute + "' is not a categorical");
    }
}

json SynthSpec::to_json() const {
    json j;
    j["n_products"] = n_products;
    j["seed"] = seed;
    j["base_sales"] = base_sales;
    j["noise_sigma"] = noise_sigma;
    j["min_features"] = min_features;
    j["max_features"] = max_features;
    j["balanced"] = balanced;
    j["type_attribute"] = type_attribute;
    j["features"] = json::array();
    for (const auto& f : features) {
        j["features"].push_back({{"canonical", f.canonical}, {"variants", f.variants}, {"effect", f.effect}});
    }
    j["categoricals"] = json::object();
    for (const auto& [attr, lv] : categoricals) {
        auto& arr = j["categoricals"][attr] = json::array();
        for (const auto& l : lv) {
            arr.push_back({{"level", l.level}, {"effect", l.effect}});
        }
    }
    j["numerics"] = numeric_names;
    return j;
}

SynthSpec SynthSpec::from_json(const json& j) {
    try {
        SynthSpec s;
        s.n_products = j.value("n_products", s.n_products);
        s.seed = j.value("seed", s.seed);
        s.base_sales = j.value("base_sales", s.base_sales);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.min_features = j.value("min_features", s.min_features);
        s.max_features = j.value("max_features", s.max_features);
        s.balanced = j.value("balanced", s.balanced);
        s.type_attribute = j.value("type_attribute", s.type_attribute);
        for (const auto& f : j.at("features")) {
            PlantedFeature pf;
            pf.canonical = f.at("canonical").get<std::string>();
            pf.variants = f.value("variants", std::vector<std::string>{pf.canonical});
            pf.effect = f.value("effect", 0.0);
            s.features.push_back(std::move(pf));
        }
        if (j.contains("categoricals")) {
            for (const auto& [attr, lv] : j.at("categoricals").items()) {
                auto& out = s.categoricals[attr];
                for (const auto& l : lv) {
                    out.push_back({l.at("level").get<std::string>(), l.value("effect", 0.0)});
                }
            }
        }
        s.numeric_names = j.value("numerics", std::vector<std::string>{});
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed synthetic spec: ") + e.what());
    }
}

SynthSpec default_spec(std::size_t n_products, std::uint64_t seed) {
    SynthSpec s;
    s.n_products = n_products;
    s.seed = seed;
    s.features = vocabulary(30.0, -30.0);
    s.categoricals = base_categoricals();
    set_effects(s.categoricals["fashion_degree"], {0.0, 10.0, 20.0});
    s.numeric_names = base_numerics();
    s.base_sales = 100.0;
    s.noise_sigma = 8.0;
    s.min_features = 2;
    s.max_features = 5;
    return s;
}

SynthSpec learnability_spec(std::size_t n_products, std::uint64_t seed) {
    SynthSpec s = default_spec(n_products, seed);
    s.features = vocabulary(8.0, -8.0);
    set_effects(s.categoricals["fashion_degree"], {0.0, 45.0, 90.0});
    // Puts the three-class Bayes accuracy near 0.95.
    s.noise_sigma = 9.0;
    s.min_features = 2;
    s.max_features = 4;
    return s;
}

SynthSpec ablation_spec(std::size_t n_products, std::uint64_t seed) {
    SynthSpec s = default_spec(n_products, seed);
    s.features = vocabulary(40.0, -40.0);
    s.features.resize(30);
    // Keep the effects symmetric after truncation.
    for (std::size_t i = 0; i < s.features.size(); ++i) {
        s.features[i].effect = 40.0 - 80.0 * static_cast<double>(i) / static_cast<double>(s.features.size() - 1);
    }
    set_effects(s.categoricals["fashion_degree"], {0.0, 0.0, 0.0});
    s.noise_sigma = 5.0;
    s.min_features = 2;
    s.max_features = 4;
    return s;
}

SynthSpec preset_spec(std::string_view name, std::size_t n_products, std::uint64_t seed) {
    if (name == "default") {
        return default_spec(n_products, seed);
    }
    if (name == "learnability") {
        return learnability_spec(n_products, seed);
    }
    if (name == "ablation") {
        return ablation_spec(n_products, seed);
    }
    throw ValidationError("unknown synthetic preset '" + std::string(name) + "' (expected default, learnability or "
                          "ablation)");
}

Catalog generate(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n_features = spec.features.size();
    const int width = spec.n_products < 100000 ? 5 : static_cast<int>(std::to_string(spec.n_products).size());

    std::vector<Product> products;
    products.reserve(spec.n_products);
    std::vector<std::size_t> order(n_features);
    for (std::size_t i = 0; i < spec.n_products; ++i) {
        Product p;
        char id[32];
        std::snprintf(id, sizeof id, "p%0*zu", width, i + 1);
        p.id = id;
        double latent = spec.base_sales;
        for (const auto& [attr, lv] : spec.categoricals) {
            std::uniform_int_distribution<std::size_t> pick(0, lv.size() - 1);
            const auto& level = lv[pick(rng)];
            p.categoricals[attr] = level.level;
            latent += level.effect;
        }
        for (const auto& name : spec.numeric_names) {
            p.numerics[name] = std::round((20.0 + 80.0 * unit(rng)) * 100.0) / 100.0;
        }

        std::vector<std::size_t> chosen;
        if (spec.balanced) {
            // Each block of F consecutive products uses every feature exactly k times; the stride
            // changes between blocks so co-occurring features vary.
            const std::size_t k = spec.min_features;
            const std::size_t strides = k > 1 ? std::max<std::size_t>(1, (n_features - 1) / (k - 1)) : 1;
            const std::size_t stride = 1 + (i / n_features) % strides;
            for (std::size_t j = 0; j < k; ++j) {
                chosen.push_back((i + j * stride) % n_features);
            }
        } else {
            std::uniform_int_distribution<std::size_t> count(spec.min_features, spec.max_features);
            const auto k = count(rng);
            for (std::size_t j = 0; j < n_features; ++j) {
                order[j] = j;
            }
            // Partial Fisher-Yates: the first k entries are a uniform sample.
            for (std::size_t j = 0; j < k; ++j) {
                std::uniform_int_distribution<std::size_t> pick(j, n_features - 1);
                std::swap(order[j], order[pick(rng)]);
                chosen.push_back(order[j]);
            }
        }

        std::string caption;
        for (std::size_t j = 0; j < chosen.size(); ++j) {
            const auto& f = spec.features[chosen[j]];
            latent += f.effect;
            std::uniform_int_distribution<std::size_t> pick(0, f.variants.size() - 1);
            std::string surface = f.variants[pick(rng)];
            if (unit(rng) < 0.5) {
                surface = title_case(surface);
            }
            if (j > 0) {
                caption += unit(rng) < 0.8 ? ", " : "; ";
            }
            caption += surface;
        }
        caption += '.';
        p.caption = std::move(caption);

        const double sales = latent + spec.noise_sigma * noise(rng);
        p.sales = std::max(0.0, std::round(sales * 100.0) / 100.0);

        std::string image = "synthetic image " + p.id;
        if (!spec.type_attribute.empty()) {
            image += " " + p.categoricals[spec.type_attribute];
        }
        p.image_ref = "data:" + image;
        products.push_back(std::move(p));
    }
    return make_catalog(std::move(products));
}

double expected_sales(const SynthSpec& spec, const Product& product) {
    double mu = spec.base_sales;
    std::set<std::string> seen_canonical;
    for (const auto& phrase : clean_caption(product.caption)) {
        for (const auto& f : spec.features) {
            if (std::find(f.variants.begin(), f.variants.end(), phrase) != f.variants.end() &&
                seen_canonical.insert(f.canonical).second) {
                mu += f.effect;
            }
        }
    }
    for (const auto& [attr, lv] : spec.categoricals) {
        auto it = product.categoricals.find(attr);
        if (it == product.categoricals.end()) {
            continue;
        }
        for (const auto& l : lv) {
            if (l.level == it->second) {
                mu += l.effect;
            }
        }
    }
    return mu;
}

double bayes_accuracy(const SynthSpec& spec, const Catalog& catalog, const QuantileThresholds& thresholds) {
    if (catalog.empty()) {
        throw ValidationError("bayes accuracy needs a non-empty catalog");
    }
    const auto& cuts = thresholds.cut_points;
    double total = 0.0;
    for (const auto& p : catalog.products) {
        const double mu = expected_sales(spec, p);
        // Clipping at zero only moves mass within class 1 as long as the first cut is non-negative.
        auto cdf = [&](double t) {
            if (spec.noise_sigma == 0.0) {
                return mu <= t ? 1.0 : 0.0;
            }
            return phi((t - mu) / spec.noise_sigma);
        };
        double best = 0.0;
        double prev = 0.0;
        for (std::size_t c = 0; c <= cuts.size(); ++c) {
            const double upper = c < cuts.size() ? cdf(cuts[c]) : 1.0;
            best = std::max(best, upper - prev);
            prev = upper;
        }
        total += best;
    }
    return total / static_cast<double>(catalog.size());
}

}  // namespace trendlens
