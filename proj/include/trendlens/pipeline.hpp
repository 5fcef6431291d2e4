#pragma once

#include "trendlens/encode.hpp"
#include "trendlens/forest.hpp"
#include "trendlens/simdedup.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace trendlens {

/// Everything a pipeline command reads. Loaded from a JSON config file, then overridden by flags.
struct PipelineConfig {
    std::uint64_t seed = 1;
    std::filesystem::path out = "artifacts";

    // paths
    std::string catalog;  // input for ingest; empty means <out>/synthetic.jsonl
    std::string catalog_format = "jsonl";
    std::string embeddings;  // JSONL for the file provider

    // cluster
    DedupConfig dedup;
    std::string representative = "heuristic";  // or "external:<url>"

    double lambda = 0.15;
    int classes = 3;

    ForestParams forest;

    std::string provider = "builtin";
    std::size_t reduced_dim = 64;
    std::string reducer = "pca";
    double train_fraction = 0.8;

    std::size_t triples = 20;
    std::string type_attribute = "product_type";

    std::size_t ablation_cases = 100;
    double ablation_decile = 0.1;

    std::string synth_preset = "default";
    std::size_t synth_products = 300;
    std::string synth_spec;  // JSON spec file; overrides the preset

    /// Fills fields present in `j`; unknown keys are a validation error.
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    /// sha256 over the canonical JSON form.
    std::string hash() const;
    void validate() const;
};

/// Names accepted by run_command.
const std::vector<std::string>& command_names();

struct CommandResult {
    /// Artifact file names written under `out`, sorted.
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
};

/// Runs one command end to end: reads upstream artifacts from `config.out`, writes its own
/// atomically and appends a line to `<out>/manifest.jsonl`.
/// Throws MissingArtifactError, ValidationError or TransportError.
CommandResult run_command(std::string_view name, const PipelineConfig& config);

/// Process exit status for an exception escaping run_command: 2 missing artifact, 3 validation, 1 otherwise.
int exit_code_for(const std::exception& e) noexcept;

/// Single-line JSON error record.
std::string error_line(std::string_view command, const std::exception& e);

/// Artifact file names.
namespace artifact {
inline constexpr const char* synthetic = "synthetic.jsonl";
inline constexpr const char* synth_spec = "synth_spec.json";
inline constexpr const char* catalog = "catalog.jsonl";
inline constexpr const char* universe = "universe.json";
inline constexpr const char* features = "features.json";
inline constexpr const char* influence = "influence.csv";
inline constexpr const char* labels = "labels.json";
inline constexpr const char* encoder = "encoder.json";
inline constexpr const char* train_set = "train.tlds";
inline constexpr const char* test_set = "test.tlds";
inline constexpr const char* model = "model.tlf";
inline constexpr const char* metrics = "metrics.json";
inline constexpr const char* triples = "triples.csv";
inline constexpr const char* ablation = "ablation.csv";
inline constexpr const char* table1 = "table1.csv";
inline constexpr const char* table2 = "table2.csv";
inline constexpr const char* table3 = "table3.csv";
inline constexpr const char* histogram = "histogram.csv";
inline constexpr const char* manifest = "manifest.jsonl";
}  // namespace artifact

}  // namespace trendlens
