#pragma once

#include "attrkit/datasets.hpp"
#include "attrkit/decomposer.hpp"
#include "attrkit/evaluation.hpp"
#include "attrkit/gateway.hpp"
#include "attrkit/llm_attributor.hpp"
#include "attrkit/retriever.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace attrkit {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Effective configuration for a run. Loaded from a JSON tree file; dotted
/// --set overrides (e.g. llm.mode=replay) are applied on the tree before
/// parsing, so the manifest snapshot always reflects what actually ran.
struct PipelineConfig {
    // data
    std::string records_path;
    std::string output_dir = "out";
    // decomposer
    std::string strategy = "nil";
    int cog_examples = 1;
    // retriever
    std::string retriever_kind = "bm25";
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    std::string retriever_endpoint;
    bool embedding_cosine = false;
    // attributor
    std::string attributor = "bm25";  // bm25 | embedding | cross_encoder | llm
    int candidate_pool_size = 100;
    int max_returned = 2;
    double fuzzy_threshold = 0.9;
    bool per_unit_calls = false;
    // llm gateway
    std::string llm_endpoint;
    std::string llm_model = "default-model";
    std::string llm_mode = "replay";
    int llm_max_in_flight = 4;
    int llm_max_retries = 3;
    std::string api_key_env = "LLM_API_KEY";
    std::string cache_dir = "cache";
    // evaluation
    std::vector<int> k_values = {1, 2, 4};
    bool micro_average = false;
    uint64_t seed = 0;

    static PipelineConfig from_json(const nlohmann::json& tree);
    nlohmann::json to_json() const;
    /// Throws ConfigError on invalid values (unknown kinds, empty k list...).
    void validate() const;
};

nlohmann::json load_config_tree(const std::filesystem::path& path);
/// Applies one dotted override like "llm.mode=replay" onto the tree.
void apply_override(nlohmann::json& tree, std::string_view assignment);

/// One attributions.jsonl row:
/// {record_id, unit_key, strategy, attributor, evidences:[...], failures:[...]}
struct AttributionRow {
    std::string record_id;
    UnitKey unit_key;
    std::string strategy;
    std::string attributor;
    std::vector<ScoredEvidence> evidences;     // ranked
    std::vector<ResolvedEvidence> resolution;  // llm attributor detail, aligned
    std::vector<std::string> failures;

    nlohmann::json to_json() const;
    static AttributionRow from_json(const nlohmann::json& row);
};

struct RunManifest {
    nlohmann::json config_snapshot;
    std::map<std::string, std::string> input_hashes;
    std::string tool_version{kToolVersion};
    std::map<std::string, std::string> stage_output_hashes;
    std::string started_at;   // timestamps live only here
    std::string finished_at;
    bool complete = false;

    nlohmann::json to_json() const;
};

class AttributionPipeline {
public:
    AttributionPipeline(PipelineConfig config, std::shared_ptr<Transport> transport = nullptr);

    std::map<std::string, DecompositionResult> run_decompose(const std::vector<TaskRecord>& records);

    std::vector<AttributionRow> run_attribute(
        const std::vector<TaskRecord>& records,
        const std::map<std::string, DecompositionResult>& decompositions);

    MetricsReport run_evaluate(const std::vector<TaskRecord>& records,
                               const std::vector<AttributionRow>& rows,
                               const std::map<std::string, DecompositionResult>& decompositions,
                               bool llm_mode) const;

    Gateway& gateway();

private:
    PipelineConfig config_;
    std::shared_ptr<Transport> transport_;
    std::unique_ptr<Gateway> gateway_;
    LexiconTagger tagger_;
};

/// ingest -> decompose -> attribute -> evaluate -> report, writing each
/// stage's JSONL under output_dir and the manifest last. A failed stage
/// leaves earlier outputs intact and the manifest marked incomplete.
RunManifest run_pipeline(const PipelineConfig& config,
                         std::shared_ptr<Transport> transport = nullptr);

// Stage file I/O shared by the CLI subcommands.
void save_decompositions(const std::map<std::string, DecompositionResult>& decompositions,
                         const std::filesystem::path& path);
std::map<std::string, DecompositionResult> load_decompositions(const std::filesystem::path& path);
void save_attributions(const std::vector<AttributionRow>& rows, const std::filesystem::path& path);
std::vector<AttributionRow> load_attributions(const std::filesystem::path& path);

}  // namespace attrkit
