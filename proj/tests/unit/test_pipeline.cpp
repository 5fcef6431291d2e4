#include "trendlens/error.hpp"
#include "trendlens/pipeline.hpp"
#include "trendlens/util.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace trendlens;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("trendlens_pipeline_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PipelineConfig small_config(const fs::path& out) {
    PipelineConfig c;
    c.out = out;
    c.seed = 5;
    c.synth_products = 240;
    c.forest.n_trees = 20;
    c.reduced_dim = 8;
    c.triples = 10;
    c.ablation_cases = 20;
    return c;
}

const std::vector<std::string> kSteps{"ingest", "clean", "cluster", "score", "label", "train", "eval-triples"};

}  // namespace

TEST_CASE("seven step run records one manifest entry per step") {
    const auto out = scratch("seven");
    const auto c = small_config(out);
    run_command("synth", c);
    fs::remove(out / artifact::manifest);
    for (const auto& step : kSteps) {
        const auto r = run_command(step, c);
        CHECK_FALSE(r.outputs.empty());
        for (const auto& name : r.outputs) {
            CHECK(fs::exists(out / name));
        }
    }
    std::istringstream manifest(slurp(out / artifact::manifest));
    std::vector<nlohmann::json> entries;
    for (std::string line; std::getline(manifest, line);) {
        entries.push_back(nlohmann::json::parse(line));
    }
    REQUIRE(entries.size() == kSteps.size());
    for (std::size_t i = 0; i < kSteps.size(); ++i) {
        CHECK(entries[i]["command"] == kSteps[i]);
        CHECK(entries[i]["config_hash"] == c.hash());
        CHECK(entries[i]["seed"] == c.seed);
        for (const auto& [name, digest] : entries[i]["outputs"].items()) {
            CHECK(digest == sha256_hex(slurp(out / name)));
        }
    }
    const auto metrics = nlohmann::json::parse(slurp(out / artifact::metrics));
    CHECK(metrics.contains("accuracy"));
    CHECK(fs::exists(out / artifact::triples));

    // No temporary files left behind by atomic writes.
    for (const auto& entry : fs::directory_iterator(out)) {
        CHECK(entry.path().filename().string().find(".tmp") == std::string::npos);
    }

    run_command("ablate", c);
    run_command("report", c);
    for (const char* name : {artifact::ablation, artifact::table1, artifact::table2, artifact::table3, artifact::histogram}) {
        CHECK(fs::exists(out / name));
    }
}

TEST_CASE("train without labels is a missing artifact") {
    const auto out = scratch("missing");
    const auto c = small_config(out);
    try {
        run_command("train", c);
        FAIL("expected MissingArtifactError");
    } catch (const MissingArtifactError& e) {
        CHECK(exit_code_for(e) == 2);
        const auto line = nlohmann::json::parse(error_line("train", e));
        CHECK(line["exit_code"] == 2);
        CHECK(line["error"] == "missing_artifact");
        CHECK(line["command"] == "train");
    }
    CHECK_THROWS_AS(run_command("ingest", c), MissingArtifactError);
    CHECK_FALSE(fs::exists(out / artifact::manifest));
}

TEST_CASE("repeated runs with one seed are byte identical") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    for (const auto& dir : {a, b}) {
        const auto c = small_config(dir);
        run_command("synth", c);
        for (const auto& step : kSteps) {
            run_command(step, c);
        }
    }
    for (const char* name : {artifact::catalog, artifact::features, artifact::influence, artifact::labels,
                             artifact::train_set, artifact::model, artifact::metrics, artifact::triples,
                             artifact::manifest}) {
        CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name);
    }
}

TEST_CASE("config parsing") {
    const auto j = nlohmann::json::parse(R"({
        "seed": 9, "out": "somewhere",
        "dedup": {"tau0": 0.7},
        "influence": {"lambda": 0.3},
        "labeler": {"classes": 4},
        "forest": {"n_trees": 50},
        "encode": {"reduced_dim": 16, "reducer": "autoencoder"}
    })");
    const auto c = PipelineConfig::from_json(j);
    CHECK(c.seed == 9);
    CHECK(c.dedup.tau0 == 0.7);
    CHECK(c.lambda == 0.3);
    CHECK(c.classes == 4);
    CHECK(c.forest.n_trees == 50);
    CHECK(c.reduced_dim == 16);
    CHECK(PipelineConfig::from_json(c.to_json()).to_json() == c.to_json());

    auto moved = c;
    moved.out = "elsewhere";
    CHECK(moved.hash() == c.hash());
    moved.lambda = 0.31;
    CHECK(moved.hash() != c.hash());

    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(R"({"labeler": {"classes": 6}})")), ValidationError);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(R"({"labeler": {"clases": 3}})")), ValidationError);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(R"({"extra": 1})")), ValidationError);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(R"({"dedup": {"bands": 10}})")), ValidationError);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::parse(R"({"influence": {"lambda": "x"}})")), ValidationError);
    CHECK_THROWS_AS(run_command("nonsense", PipelineConfig{}), ValidationError);

    const ValidationError v("bad");
    CHECK(exit_code_for(v) == 3);
    const std::runtime_error other("boom");
    CHECK(exit_code_for(other) == 1);
    CHECK(nlohmann::json::parse(error_line("x", v))["error"] == "validation");
}
