#include "trendlens/captions.hpp"
#include "trendlens/corpus.hpp"
#include "trendlens/encode.hpp"
#include "trendlens/error.hpp"
#include "trendlens/evalx.hpp"
#include "trendlens/forest.hpp"
#include "trendlens/influence.hpp"
#include "trendlens/labeler.hpp"
#include "trendlens/pipeline.hpp"
#include "trendlens/simdedup.hpp"
#include "trendlens/synth.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace trendlens;

namespace {

std::vector<std::string> to_vector(const ShingleSet& s) { return {s.begin(), s.end()}; }

ShingleSet to_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

nlohmann::json from_py(const py::handle& obj) {
    auto dumps = py::module_::import("json").attr("dumps");
    return nlohmann::json::parse(dumps(obj).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_trendlens, m) {
    m.doc() = "Caption-feature influence scoring, sales-class labeling and random-forest prediction";

    static py::exception<ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
    static py::exception<MissingArtifactError> missing_error(m, "MissingArtifactError", PyExc_FileNotFoundError);
    static py::exception<TransportError> transport_error(m, "TransportError", PyExc_ConnectionError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const MissingArtifactError& e) {
            missing_error(e.what());
        } catch (const ValidationError& e) {
            validation_error(e.what());
        } catch (const TransportError& e) {
            transport_error(e.what());
        }
    });

    py::class_<Product>(m, "Product")
        .def(py::init<>())
        .def_readwrite("id", &Product::id)
        .def_readwrite("caption", &Product::caption)
        .def_readwrite("image_ref", &Product::image_ref)
        .def_readwrite("categoricals", &Product::categoricals)
        .def_readwrite("numerics", &Product::numerics)
        .def_readwrite("sales", &Product::sales)
        .def("__repr__", [](const Product& p) { return "<Product " + p.id + ">"; });

    py::class_<Catalog>(m, "Catalog")
        .def_readonly("products", &Catalog::products)
        .def("__len__", &Catalog::size)
        .def("sales", &Catalog::sales)
        .def("to_jsonl", [](const Catalog& c) { return serialize_catalog_jsonl(c); });

    m.def("make_catalog", &make_catalog, py::arg("products"));
    m.def("parse_catalog_jsonl", &parse_catalog_jsonl, py::arg("text"));
    m.def("parse_catalog_csv", &parse_catalog_csv, py::arg("text"));
    m.def(
        "load_catalog",
        [](const std::filesystem::path& path, const std::string& format) {
            return load_catalog(path, parse_catalog_format(format));
        },
        py::arg("path"), py::arg("format") = "jsonl");

    m.def("clean_caption", &clean_caption, py::arg("raw"));

    m.def(
        "shingle",
        [](const std::string& phrase, const std::string& mode) { return to_vector(shingle(phrase, parse_shingle_mode(mode))); },
        py::arg("phrase"), py::arg("mode") = "unigram");
    m.def(
        "exact_jaccard",
        [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
            return exact_jaccard(to_set(a), to_set(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "minhash",
        [](const std::vector<std::string>& shingles, std::size_t d, std::uint64_t seed) {
            return minhash_signature(to_set(shingles), d, seed).values;
        },
        py::arg("shingles"), py::arg("d") = 128, py::arg("seed") = 1);
    m.def(
        "estimate_jaccard",
        [](const std::vector<std::string>& a, const std::vector<std::string>& b, std::size_t d, std::uint64_t seed) {
            return estimate_jaccard(minhash_signature(to_set(a), d, seed), minhash_signature(to_set(b), d, seed));
        },
        py::arg("a"), py::arg("b"), py::arg("d") = 128, py::arg("seed") = 1);

    m.def(
        "cluster_phrases",
        [](const std::map<std::string, std::size_t>& frequency, double tau0, std::size_t d, std::uint64_t seed,
           std::size_t bands, std::size_t rows, const std::string& mode) {
            FeatureUniverse universe;
            for (const auto& [phrase, f] : frequency) {
                for (std::size_t i = 0; i < f; ++i) {
                    universe.add("synthetic-" + std::to_string(i), {phrase});
                }
            }
            DedupConfig config;
            config.tau0 = tau0;
            config.d = d;
            config.seed = seed;
            config.bands = bands;
            config.rows = rows;
            config.mode = parse_shingle_mode(mode);
            std::vector<std::pair<std::vector<std::string>, std::string>> out;
            for (const auto& g : cluster_synonyms(universe, config)) {
                out.emplace_back(std::vector<std::string>(g.members.begin(), g.members.end()), g.representative);
            }
            return out;
        },
        py::arg("frequency"), py::arg("tau0") = 0.8, py::arg("d") = 128, py::arg("seed") = 1, py::arg("bands") = 16,
        py::arg("rows") = 8, py::arg("mode") = "unigram",
        "Clusters phrases (mapped to their product frequency) into synonym groups; returns (members, representative).");

    m.def(
        "influence_scores",
        [](const Catalog& catalog, double lambda, double tau0, std::uint64_t seed) {
            DedupConfig config;
            config.tau0 = tau0;
            config.seed = seed;
            const auto cf = canonicalize(catalog, cluster_synonyms(build_universe(catalog), config));
            py::list out;
            for (const auto& r : influence_scores(catalog, cf.feature_set, cf.product_features, lambda).records) {
                py::dict d;
                d["feature"] = r.feature;
                d["frequency"] = r.frequency;
                d["mean_norm_sales"] = r.mean_norm_sales;
                d["norm_frequency"] = r.norm_frequency;
                d["score"] = r.score;
                out.append(d);
            }
            return out;
        },
        py::arg("catalog"), py::arg("lambda_") = kDefaultLambda, py::arg("tau0") = 0.8, py::arg("seed") = 1,
        "Clusters the catalog's caption phrases and ranks canonical features by influence score.");

    py::class_<QuantileThresholds>(m, "QuantileThresholds")
        .def_readonly("cut_points", &QuantileThresholds::cut_points)
        .def_readonly("class_count", &QuantileThresholds::class_count);
    m.def(
        "fit_thresholds", [](const std::vector<double>& sales, int c) { return fit_thresholds(sales, c); },
        py::arg("sales"), py::arg("class_count") = kDefaultClassCount);
    m.def("assign_class", &assign_class, py::arg("sale"), py::arg("thresholds"));
    m.def(
        "assign_classes",
        [](const std::vector<double>& sales, const QuantileThresholds& t) { return assign_classes(sales, t); },
        py::arg("sales"), py::arg("thresholds"));

    m.def(
        "prediction_score", [](const std::vector<double>& probs) { return prediction_score(ClassDistribution{probs}); },
        py::arg("probs"));
    m.def(
        "kendall_tau_triple",
        [](const std::array<double, 3>& predicted, const std::array<int, 3>& truth) {
            return kendall_tau_triple(predicted, truth).tau;
        },
        py::arg("predicted"), py::arg("truth"));

    py::class_<ForestModel>(m, "ForestModel")
        .def_property_readonly("class_count", &ForestModel::class_count)
        .def_property_readonly("dim", &ForestModel::dim)
        .def_property_readonly("n_trees", [](const ForestModel& f) { return f.trees().size(); })
        .def_property_readonly("train_accuracy", &ForestModel::train_accuracy)
        .def("proba", [](const ForestModel& f, const std::vector<double>& x) { return f.proba(x).probs; })
        .def("serialize", &serialize_model);
    m.def("load_model", &load_model, py::arg("path"));
    m.def(
        "train_forest",
        [](const std::filesystem::path& dataset_path, std::size_t n_trees, std::uint64_t seed) {
            ForestParams params;
            params.n_trees = n_trees;
            params.seed = seed;
            return train(load_dataset(dataset_path), params);
        },
        py::arg("dataset_path"), py::arg("n_trees") = 200, py::arg("seed") = 1);
    m.def(
        "evaluate_accuracy",
        [](const ForestModel& model, const std::filesystem::path& dataset_path) {
            return evaluate_accuracy(model, load_dataset(dataset_path));
        },
        py::arg("model"), py::arg("dataset_path"));

    m.def(
        "synth_catalog",
        [](const std::string& preset, std::size_t n_products, std::uint64_t seed) {
            return generate(preset_spec(preset, n_products, seed));
        },
        py::arg("preset") = "default", py::arg("n_products") = 300, py::arg("seed") = 1);

    m.def("command_names", &command_names);
    m.def(
        "run_command",
        [](const std::string& name, const py::dict& config) {
            const auto result = run_command(name, PipelineConfig::from_json(from_py(config)));
            return py::make_tuple(result.outputs, result.warnings);
        },
        py::arg("name"), py::arg("config"),
        "Runs one pipeline command with a config mapping shaped like the JSON config file; returns (outputs, warnings).");
}
