// trendlens command-line driver: one subcommand per pipeline stage.

#include "trendlens/error.hpp"
#include "trendlens/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> classes;
    std::optional<double> lambda;
    std::optional<double> tau0;
    std::optional<std::string> provider;
    std::optional<std::string> out;
    std::optional<std::string> catalog;
    std::optional<std::string> format;
    std::optional<std::string> preset;
    std::optional<std::size_t> n_products;
    std::optional<std::string> spec;
    std::optional<std::size_t> triples;
    std::optional<std::size_t> cases;
    std::optional<unsigned> threads;
};

trendlens::PipelineConfig resolve(const Flags& f) {
    auto c = f.config.empty() ? trendlens::PipelineConfig{} : trendlens::PipelineConfig::load(f.config);
    if (f.seed) c.seed = *f.seed;
    if (f.classes) c.classes = *f.classes;
    if (f.lambda) c.lambda = *f.lambda;
    if (f.tau0) c.dedup.tau0 = *f.tau0;
    if (f.provider) c.provider = *f.provider;
    if (f.out) c.out = *f.out;
    if (f.catalog) c.catalog = *f.catalog;
    if (f.format) c.catalog_format = *f.format;
    if (f.preset) c.synth_preset = *f.preset;
    if (f.n_products) c.synth_products = *f.n_products;
    if (f.spec) c.synth_spec = *f.spec;
    if (f.triples) c.triples = *f.triples;
    if (f.cases) c.ablation_cases = *f.cases;
    if (f.threads) c.forest.threads = *f.threads;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Caption-feature influence and sales-class pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--config", f.config, "JSON config file");
    app.add_option("--seed", f.seed, "Global seed");
    app.add_option("--classes", f.classes, "Number of sales classes (3, 4 or 5)");
    app.add_option("--lambda", f.lambda, "Frequency weight in the influence score");
    app.add_option("--tau0", f.tau0, "Similarity threshold for synonym clustering");
    app.add_option("--provider", f.provider, "builtin | file:<path> | remote:<url>");
    app.add_option("--out", f.out, "Artifact directory");
    app.add_option("--threads", f.threads, "Forest training threads");

    std::string command;
    for (const auto& name : trendlens::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->callback([&command, name] { command = name; });
        if (name == "ingest") {
            sub->add_option("--catalog", f.catalog, "Input catalog (defaults to <out>/synthetic.jsonl)");
            sub->add_option("--format", f.format, "jsonl | csv");
        } else if (name == "synth") {
            sub->add_option("--preset", f.preset, "default | learnability | ablation");
            sub->add_option("-n,--n-products", f.n_products, "Number of products");
            sub->add_option("--spec", f.spec, "JSON synthetic spec (overrides the preset)");
        } else if (name == "eval-triples") {
            sub->add_option("--m", f.triples, "Number of triples");
        } else if (name == "ablate") {
            sub->add_option("--cases", f.cases, "Cases per polarity");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }

    try {
        const auto config = resolve(f);
        const auto result = trendlens::run_command(command, config);
        for (const auto& w : result.warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        for (const auto& o : result.outputs) {
            std::cout << (config.out / o).string() << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << trendlens::error_line(command, e) << '\n';
        return trendlens::exit_code_for(e);
    }
}
