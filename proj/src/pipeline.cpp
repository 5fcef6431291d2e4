#include "trendlens/pipeline.hpp"

#include "trendlens/captions.hpp"
#include "trendlens/corpus.hpp"
#include "trendlens/error.hpp"
#include "trendlens/evalx.hpp"
#include "trendlens/influence.hpp"
#include "trendlens/labeler.hpp"
#include "trendlens/synth.hpp"
#include "trendlens/util.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

namespace trendlens {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

template <typename T>
void take(const json& obj, const char* key, T& field, std::set<std::string>& known) {
    known.insert(key);
    if (obj.contains(key)) {
        field = obj.at(key).get<T>();
    }
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) {
            throw ValidationError("unknown config key '" + where + key + "'");
        }
    }
}

const json& section(const json& j, const char* name) {
    static const json empty = json::object();
    if (!j.contains(name)) {
        return empty;
    }
    const auto& s = j.at(name);
    if (!s.is_object()) {
        throw ValidationError(std::string("config section '") + name + "' must be an object");
    }
    return s;
}

/// Shared state for one command invocation.
class Run {
public:
    Run(std::string command, const PipelineConfig& config) : command_(std::move(command)), config_(config) {
        fs::create_directories(config_.out);
    }

    const PipelineConfig& config() const { return config_; }
    fs::path path(const char* name) const { return config_.out / name; }

    /// Reads an upstream artifact, naming the command that produces it when absent.
    std::string require(const char* name, const char* producer) const {
        const auto p = path(name);
        if (!fs::exists(p)) {
            throw MissingArtifactError(name, std::string("missing artifact ") + name + " in " + config_.out.string() +
                                                 " (run '" + producer + "' first)");
        }
        return read_file(p);
    }

    void write(const char* name, std::string_view contents) {
        write_file_atomic(path(name), contents);
        outputs_.insert(name);
    }

    void warn(std::string message) { warnings_.push_back(std::move(message)); }

    CommandResult finish() {
        json entry;
        entry["command"] = command_;
        entry["config_hash"] = config_.hash();
        entry["seed"] = config_.seed;
        json hashes = json::object();
        for (const auto& name : outputs_) {
            hashes[name] = sha256_file(path(name.c_str()));
        }
        entry["outputs"] = hashes;
        const auto manifest = path(artifact::manifest);
        std::string existing = fs::exists(manifest) ? read_file(manifest) : std::string{};
        existing += entry.dump() + '\n';
        write_file_atomic(manifest, existing);
        return {std::vector<std::string>(outputs_.begin(), outputs_.end()), warnings_};
    }

private:
    std::string command_;
    const PipelineConfig& config_;
    std::set<std::string> outputs_;
    std::vector<std::string> warnings_;
};

Catalog stage_catalog(const Run& run) { return parse_catalog_jsonl(run.require(artifact::catalog, "ingest")); }

json parse_json(const std::string& text, const char* name) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string(name) + " is not valid JSON: " + e.what());
    }
}

CanonicalFeatures stage_features(const Run& run, const Catalog& catalog) {
    const auto j = parse_json(run.require(artifact::features, "cluster"), artifact::features);
    std::vector<SynonymGroup> groups;
    try {
        for (const auto& g : j.at("groups")) {
            SynonymGroup group;
            for (const auto& m : g.at("members")) {
                group.members.insert(m.get<std::string>());
            }
            group.representative = g.at("representative").get<std::string>();
            groups.push_back(std::move(group));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed features.json: ") + e.what());
    }
    return canonicalize(catalog, groups);
}

struct Labels {
    QuantileThresholds thresholds;
    std::map<std::string, SalesClass> by_id;
};

Labels stage_labels(const Run& run) {
    const auto j = parse_json(run.require(artifact::labels, "label"), artifact::labels);
    Labels l;
    try {
        l.thresholds.class_count = j.at("class_count").get<int>();
        l.thresholds.cut_points = j.at("cut_points").get<std::vector<double>>();
        l.by_id = j.at("labels").get<std::map<std::string, SalesClass>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed labels.json: ") + e.what());
    }
    return l;
}

std::unique_ptr<EmbeddingProvider> provider_for(const PipelineConfig& config) {
    if (config.provider == "file" && !config.embeddings.empty()) {
        return make_provider("file:" + config.embeddings);
    }
    return make_provider(config.provider);
}

FeatureEncoder stage_encoder(const Run& run) {
    return FeatureEncoder::from_json(parse_json(run.require(artifact::encoder, "train"), artifact::encoder));
}

ForestModel stage_model(const Run& run) { return parse_model(run.require(artifact::model, "train")); }

InfluenceRanking ranking_for(const PipelineConfig& config, const Catalog& catalog, const CanonicalFeatures& cf) {
    return influence_scores(catalog, cf.feature_set, cf.product_features, config.lambda);
}

// Minimal CSV row splitter for reports this module wrote itself.
std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    return out;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        if (end > start) {
            rows.push_back(split_csv_line(std::string_view(text).substr(start, end - start)));
        }
        start = end + 1;
    }
    return rows;
}

// ---- commands ----

void cmd_synth(Run& run) {
    const auto& c = run.config();
    SynthSpec spec = c.synth_spec.empty()
                         ? preset_spec(c.synth_preset, c.synth_products, derive_seed(c.seed, "synth"))
                         : SynthSpec::from_json(parse_json(read_file(c.synth_spec), "synthetic spec"));
    const auto catalog = generate(spec);
    run.write(artifact::synthetic, serialize_catalog_jsonl(catalog));
    run.write(artifact::synth_spec, spec.to_json().dump(2) + '\n');
}

void cmd_ingest(Run& run) {
    const auto& c = run.config();
    const fs::path source = c.catalog.empty() ? run.path(artifact::synthetic) : fs::path(c.catalog);
    if (!fs::exists(source)) {
        throw MissingArtifactError(source.filename().string(), "missing catalog " + source.string() +
                                                                   (c.catalog.empty() ? " (run 'synth' or pass --catalog)" : ""));
    }
    const auto catalog = load_catalog(source, parse_catalog_format(c.catalog_format));
    run.write(artifact::catalog, serialize_catalog_jsonl(catalog));
}

void cmd_clean(Run& run) {
    const auto universe = build_universe(stage_catalog(run));
    json phrases = json::array();
    for (const auto& [phrase, freq] : universe.frequency) {
        const auto& src = universe.source_index.at(phrase);
        phrases.push_back({{"phrase", phrase}, {"frequency", freq}, {"products", std::vector<std::string>(src.begin(), src.end())}});
    }
    run.write(artifact::universe, json{{"phrases", phrases}}.dump(1) + '\n');
}

void cmd_cluster(Run& run) {
    const auto& c = run.config();
    const auto catalog = stage_catalog(run);
    const auto universe = build_universe(catalog);
    DedupConfig dedup = c.dedup;
    dedup.seed = derive_seed(c.seed, "minhash");
    auto groups = cluster_synonyms(universe, dedup);
    if (c.representative.starts_with("external:")) {
        HttpRepresentativeAdapter adapter(c.representative.substr(9));
        for (auto& g : groups) {
            if (g.members.size() > 1) {
                g.representative = select_representative(g, universe, RepresentativeStrategy::external, &adapter);
            }
        }
    }
    const auto cf = canonicalize(catalog, groups);

    json j;
    j["dedup"] = {{"d", dedup.d},         {"seed", dedup.seed},   {"tau0", dedup.tau0},
                  {"bands", dedup.bands}, {"rows", dedup.rows},   {"shingle", std::string(to_string(dedup.mode))},
                  {"exact_verification", dedup.exact_verification}};
    j["phrase_count"] = universe.size();
    j["group_count"] = cf.feature_set.group_count();
    j["groups"] = json::array();
    for (const auto& g : groups) {
        j["groups"].push_back({{"representative", g.representative},
                               {"members", std::vector<std::string>(g.members.begin(), g.members.end())}});
    }
    j["product_features"] = cf.product_features;
    run.write(artifact::features, j.dump(1) + '\n');
}

void cmd_score(Run& run) {
    const auto catalog = stage_catalog(run);
    const auto cf = stage_features(run, catalog);
    run.write(artifact::influence, ranking_csv(ranking_for(run.config(), catalog, cf)));
}

void cmd_label(Run& run) {
    const auto& c = run.config();
    const auto catalog = stage_catalog(run);
    const auto sales = catalog.sales();
    const auto thresholds = fit_thresholds(sales, c.classes);
    const auto labels = assign_classes(sales, thresholds);
    const auto counts = class_counts(labels, c.classes);
    const double imbalance = class_imbalance(counts);
    if (imbalance > kImbalanceWarning) {
        run.warn("class sizes deviate from n/C by " + format_g(imbalance * 100.0, 3) + "% (heavy ties in sales)");
    }
    json by_id = json::object();
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        by_id[catalog.products[i].id] = labels[i];
    }
    json j;
    j["class_count"] = c.classes;
    j["cut_points"] = thresholds.cut_points;
    j["counts"] = counts;
    j["imbalance"] = imbalance;
    j["labels"] = by_id;
    run.write(artifact::labels, j.dump(1) + '\n');
}

void cmd_train(Run& run) {
    const auto& c = run.config();
    const auto labels = stage_labels(run);
    const auto catalog = stage_catalog(run);
    const auto [train_cat, test_cat] = split(catalog, c.train_fraction, derive_seed(c.seed, "split"));
    auto labels_of = [&](const Catalog& part) {
        std::vector<SalesClass> out;
        for (const auto& p : part.products) {
            auto it = labels.by_id.find(p.id);
            if (it == labels.by_id.end()) {
                throw ValidationError("labels.json has no class for product '" + p.id + "' (re-run 'label')");
            }
            out.push_back(it->second);
        }
        return out;
    };
    const int classes = labels.thresholds.class_count;
    auto provider = provider_for(c);
    EncoderConfig enc_config;
    enc_config.reduced_dim = c.reduced_dim;
    enc_config.method = parse_reducer_method(c.reducer);
    enc_config.autoencoder.seed = derive_seed(c.seed, "autoencoder");
    const auto encoder = FeatureEncoder::fit(train_cat, *provider, enc_config);
    const auto train_set = encoder.encode_all(train_cat.products, labels_of(train_cat), classes, *provider);
    const auto test_set = encoder.encode_all(test_cat.products, labels_of(test_cat), classes, *provider);

    ForestParams params = c.forest;
    params.seed = derive_seed(c.seed, "forest");
    const auto model = train(train_set, params);
    const double test_accuracy = test_set.size() > 0 ? evaluate_accuracy(model, test_set) : 0.0;

    json metrics = json::object();
    if (fs::exists(run.path(artifact::metrics))) {
        metrics = parse_json(read_file(run.path(artifact::metrics)), artifact::metrics);
    }
    metrics["accuracy"][std::to_string(classes)] = {{"train_accuracy", model.train_accuracy()},
                                                    {"test_accuracy", test_accuracy},
                                                    {"n_train", train_set.size()},
                                                    {"n_test", test_set.size()},
                                                    {"dim", model.dim()}};
    run.write(artifact::encoder, encoder.to_json().dump() + '\n');
    run.write(artifact::train_set, serialize_dataset(train_set));
    run.write(artifact::test_set, serialize_dataset(test_set));
    run.write(artifact::model, serialize_model(model));
    run.write(artifact::metrics, metrics.dump(1) + '\n');
}

double score_product(const ForestModel& model, const FeatureEncoder& encoder, EmbeddingProvider& provider,
                     const Product& p) {
    return prediction_score(predict_proba(model, encoder.encode(p, provider)));
}

void cmd_eval_triples(Run& run) {
    const auto& c = run.config();
    const auto catalog = stage_catalog(run);
    const auto labels = stage_labels(run);
    const auto model = stage_model(run);
    const auto encoder = stage_encoder(run);
    auto provider = provider_for(c);

    std::map<std::string, const Product*> by_id;
    for (const auto& p : catalog.products) {
        by_id[p.id] = &p;
    }
    const auto triples = select_triples(catalog, labels.by_id, c.triples, derive_seed(c.seed, "triples"),
                                        c.type_attribute);
    std::vector<TripleResult> results;
    for (const auto& t : triples) {
        std::array<double, 3> scores{};
        for (std::size_t k = 0; k < 3; ++k) {
            scores[k] = score_product(model, encoder, *provider, *by_id.at(t.ids[k]));
        }
        results.push_back(kendall_tau_triple(scores, t.truth));
    }
    run.write(artifact::triples, triples_csv(triples, results));
}

void cmd_ablate(Run& run) {
    const auto& c = run.config();
    const auto catalog = stage_catalog(run);
    const auto cf = stage_features(run, catalog);
    const auto model = stage_model(run);
    const auto encoder = stage_encoder(run);
    auto provider = provider_for(c);

    const auto ranking = ranking_for(c, catalog, cf);
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(c.ablation_decile * static_cast<double>(ranking.records.size()))));
    const auto [top, bottom] = top_bottom(ranking, count);
    auto good = plan_ablation(catalog, cf, top, Polarity::good, c.ablation_cases, derive_seed(c.seed, "ablation/good"));
    auto bad = plan_ablation(catalog, cf, bottom, Polarity::bad, c.ablation_cases, derive_seed(c.seed, "ablation/bad"));
    good = run_ablation(std::move(good), model, *provider, encoder);
    bad = run_ablation(std::move(bad), model, *provider, encoder);
    good.insert(good.end(), std::make_move_iterator(bad.begin()), std::make_move_iterator(bad.end()));
    run.write(artifact::ablation, ablation_csv(good));
}

std::string histogram_csv(const std::vector<double>& sales, std::size_t bins) {
    const auto [lo_it, hi_it] = std::minmax_element(sales.begin(), sales.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
    std::vector<std::size_t> counts(bins, 0);
    for (double s : sales) {
        auto b = static_cast<std::size_t>((s - lo) / width);
        counts[std::min(b, bins - 1)]++;
    }
    std::string out = "bin_lower,bin_upper,count\n";
    for (std::size_t b = 0; b < bins; ++b) {
        out += format_g(lo + width * static_cast<double>(b), 6) + ',' +
               format_g(lo + width * static_cast<double>(b + 1), 6) + ',' + std::to_string(counts[b]) + '\n';
    }
    return out;
}

void cmd_report(Run& run) {
    const auto catalog = stage_catalog(run);
    run.write(artifact::histogram, histogram_csv(catalog.sales(), 20));

    if (fs::exists(run.path(artifact::metrics))) {
        const auto metrics = parse_json(read_file(run.path(artifact::metrics)), artifact::metrics);
        const auto accuracy = metrics.value("accuracy", json::object());
        std::map<int, json> rows;
        for (const auto& [classes, m] : accuracy.items()) {
            rows[std::stoi(classes)] = m;
        }
        std::string out = "classes,test_accuracy,train_accuracy,n_train,n_test\n";
        for (const auto& [classes, m] : rows) {
            out += std::to_string(classes) + ',' + format_g(m.at("test_accuracy").get<double>(), 4) + ',' +
                   format_g(m.at("train_accuracy").get<double>(), 4) + ',' + std::to_string(m.at("n_train").get<std::size_t>()) +
                   ',' + std::to_string(m.at("n_test").get<std::size_t>()) + '\n';
        }
        run.write(artifact::table1, out);
    }

    if (fs::exists(run.path(artifact::triples))) {
        const auto rows = read_csv_rows(read_file(run.path(artifact::triples)));
        std::string out = "triple,product_type,s_class1,s_class2,s_class3,tau\n";
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() < 14) {
                continue;
            }
            if (r[1].empty()) {
                out += r[0] + ",,,,," + r[13] + '\n';
            } else {
                out += r[0] + ',' + csv_field(r[1]) + ',' + r[8] + ',' + r[9] + ',' + r[10] + ',' + r[13] + '\n';
            }
        }
        run.write(artifact::table2, out);
    }

    if (fs::exists(run.path(artifact::ablation))) {
        const auto rows = read_csv_rows(read_file(run.path(artifact::ablation)));
        struct Tally {
            std::string remove;
            std::string score;
            std::size_t cases = 0, original = 0, modified = 0, ties = 0, matches = 0;
        };
        std::vector<std::string> order;
        std::map<std::string, Tally> tallies;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& r = rows[i];
            if (r.size() < 7) {
                continue;
            }
            const auto key = r[0] + '\n' + r[1];
            if (!tallies.contains(key)) {
                order.push_back(key);
                tallies[key] = Tally{r[0], r[2]};
            }
            auto& t = tallies[key];
            ++t.cases;
            t.original += r[5] == "original";
            t.modified += r[5] == "modified";
            t.ties += r[5] == "tie";
            t.matches += r[6] == "yes";
        }
        std::string out = "remove,feature,feature_score,cases,original_higher,modified_higher,ties,matching\n";
        for (const auto& key : order) {
            const auto& t = tallies[key];
            out += t.remove + ',' + csv_field(key.substr(key.find('\n') + 1)) + ',' + t.score + ',' +
                   std::to_string(t.cases) + ',' + std::to_string(t.original) + ',' + std::to_string(t.modified) + ',' +
                   std::to_string(t.ties) + ',' + std::to_string(t.matches) + '\n';
        }
        run.write(artifact::table3, out);
    }
}

const std::map<std::string, std::function<void(Run&)>, std::less<>>& commands() {
    static const std::map<std::string, std::function<void(Run&)>, std::less<>> table = {
        {"synth", cmd_synth},   {"ingest", cmd_ingest},     {"clean", cmd_clean},
        {"cluster", cmd_cluster}, {"score", cmd_score},     {"label", cmd_label},
        {"train", cmd_train},   {"eval-triples", cmd_eval_triples}, {"ablate", cmd_ablate},
        {"report", cmd_report},
    };
    return table;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    if (!j.is_object()) {
        throw ValidationError("config must be a JSON object");
    }
    PipelineConfig c;
    try {
        std::set<std::string> top;
        take(j, "seed", c.seed, top);
        std::string out = c.out.string();
        take(j, "out", out, top);
        c.out = out;

        std::set<std::string> known;
        const auto& paths = section(j, "paths");
        take(paths, "catalog", c.catalog, known);
        take(paths, "catalog_format", c.catalog_format, known);
        take(paths, "embeddings", c.embeddings, known);
        reject_unknown(paths, known, "paths.");

        known.clear();
        const auto& dedup = section(j, "dedup");
        take(dedup, "d", c.dedup.d, known);
        take(dedup, "tau0", c.dedup.tau0, known);
        take(dedup, "bands", c.dedup.bands, known);
        take(dedup, "rows", c.dedup.rows, known);
        take(dedup, "exact_verification", c.dedup.exact_verification, known);
        take(dedup, "representative", c.representative, known);
        std::string shingle(to_string(c.dedup.mode));
        take(dedup, "shingle", shingle, known);
        c.dedup.mode = parse_shingle_mode(shingle);
        reject_unknown(dedup, known, "dedup.");

        known.clear();
        const auto& influence = section(j, "influence");
        take(influence, "lambda", c.lambda, known);
        reject_unknown(influence, known, "influence.");

        known.clear();
        const auto& labeler = section(j, "labeler");
        take(labeler, "classes", c.classes, known);
        reject_unknown(labeler, known, "labeler.");

        known.clear();
        const auto& forest = section(j, "forest");
        take(forest, "n_trees", c.forest.n_trees, known);
        take(forest, "max_depth", c.forest.max_depth, known);
        take(forest, "min_samples_split", c.forest.min_samples_split, known);
        take(forest, "features_per_split", c.forest.features_per_split, known);
        take(forest, "bootstrap", c.forest.bootstrap, known);
        take(forest, "threads", c.forest.threads, known);
        reject_unknown(forest, known, "forest.");

        known.clear();
        const auto& encode = section(j, "encode");
        take(encode, "provider", c.provider, known);
        take(encode, "reduced_dim", c.reduced_dim, known);
        take(encode, "reducer", c.reducer, known);
        take(encode, "train_fraction", c.train_fraction, known);
        reject_unknown(encode, known, "encode.");

        known.clear();
        const auto& eval = section(j, "eval");
        take(eval, "triples", c.triples, known);
        take(eval, "type_attribute", c.type_attribute, known);
        take(eval, "ablation_cases", c.ablation_cases, known);
        take(eval, "ablation_decile", c.ablation_decile, known);
        reject_unknown(eval, known, "eval.");

        known.clear();
        const auto& synth = section(j, "synth");
        take(synth, "preset", c.synth_preset, known);
        take(synth, "n_products", c.synth_products, known);
        take(synth, "spec", c.synth_spec, known);
        reject_unknown(synth, known, "synth.");

        top.insert({"paths", "dedup", "influence", "labeler", "forest", "encode", "eval", "synth"});
        reject_unknown(j, top, "");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    return from_json(parse_json(read_file(path), "config"));
}

json PipelineConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["out"] = out.string();
    j["paths"] = {{"catalog", catalog}, {"catalog_format", catalog_format}, {"embeddings", embeddings}};
    j["dedup"] = {{"d", dedup.d},
                  {"tau0", dedup.tau0},
                  {"bands", dedup.bands},
                  {"rows", dedup.rows},
                  {"exact_verification", dedup.exact_verification},
                  {"representative", representative},
                  {"shingle", std::string(to_string(dedup.mode))}};
    j["influence"] = {{"lambda", lambda}};
    j["labeler"] = {{"classes", classes}};
    j["forest"] = {{"n_trees", forest.n_trees},
                   {"max_depth", forest.max_depth},
                   {"min_samples_split", forest.min_samples_split},
                   {"features_per_split", forest.features_per_split},
                   {"bootstrap", forest.bootstrap},
                   {"threads", forest.threads}};
    j["encode"] = {{"provider", provider},
                   {"reduced_dim", reduced_dim},
                   {"reducer", reducer},
                   {"train_fraction", train_fraction}};
    j["eval"] = {{"triples", triples},
                 {"type_attribute", type_attribute},
                 {"ablation_cases", ablation_cases},
                 {"ablation_decile", ablation_decile}};
    j["synth"] = {{"preset", synth_preset}, {"n_products", synth_products}, {"spec", synth_spec}};
    return j;
}

std::string PipelineConfig::hash() const {
    auto j = to_json();
    // Where artifacts land does not change what is computed.
    j.erase("out");
    return sha256_hex(j.dump());
}

void PipelineConfig::validate() const {
    if (classes < 3 || classes > 5) {
        throw ValidationError("classes must be 3, 4 or 5, got " + std::to_string(classes));
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ValidationError("lambda must be a finite non-negative number");
    }
    if (!(dedup.tau0 > 0.0 && dedup.tau0 <= 1.0)) {
        throw ValidationError("tau0 must lie in (0, 1], got " + format_g(dedup.tau0));
    }
    if (dedup.d == 0 || dedup.bands == 0 || dedup.rows == 0 || dedup.bands * dedup.rows != dedup.d) {
        throw ValidationError("LSH needs bands * rows == d with all three positive");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ValidationError("train_fraction must lie in (0, 1)");
    }
    if (!(ablation_decile > 0.0 && ablation_decile <= 0.5)) {
        throw ValidationError("ablation_decile must lie in (0, 0.5]");
    }
    if (forest.n_trees == 0) {
        throw ValidationError("forest.n_trees must be positive");
    }
    if (representative != "heuristic" && !representative.starts_with("external:")) {
        throw ValidationError("dedup.representative must be 'heuristic' or 'external:<url>'");
    }
    parse_reducer_method(reducer);
    parse_catalog_format(catalog_format);
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"synth", "ingest", "clean", "cluster", "score",
                                                   "label", "train", "eval-triples", "ablate", "report"};
    return names;
}

CommandResult run_command(std::string_view name, const PipelineConfig& config) {
    const auto& table = commands();
    auto it = table.find(name);
    if (it == table.end()) {
        throw ValidationError("unknown command '" + std::string(name) + "'");
    }
    config.validate();
    Run run(std::string(name), config);
    it->second(run);
    return run.finish();
}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const MissingArtifactError*>(&e) != nullptr) {
        return 2;
    }
    if (dynamic_cast<const ValidationError*>(&e) != nullptr) {
        return 3;
    }
    return 1;
}

std::string error_line(std::string_view command, const std::exception& e) {
    json j;
    j["command"] = command;
    j["exit_code"] = exit_code_for(e);
    if (const auto* missing = dynamic_cast<const MissingArtifactError*>(&e)) {
        j["error"] = "missing_artifact";
        j["artifact"] = missing->artifact();
    } else if (dynamic_cast<const ValidationError*>(&e) != nullptr) {
        j["error"] = "validation";
    } else if (const auto* transport = dynamic_cast<const TransportError*>(&e)) {
        j["error"] = "transport";
        j["attempts"] = transport->attempts();
        j["status"] = transport->status();
    } else {
        j["error"] = "internal";
    }
    j["message"] = e.what();
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace trendlens
