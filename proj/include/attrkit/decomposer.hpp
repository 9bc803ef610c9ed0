#pragma once

#include "attrkit/gateway.hpp"
#include "attrkit/text.hpp"
#include "attrkit/types.hpp"

#include <json.hpp>

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace attrkit {

enum class StrategyKind { NIL, FACTSCORE, COG, COG_NO_NEG };

std::string_view to_string(StrategyKind kind);
std::optional<StrategyKind> strategy_from_string(std::string_view s);

struct FewShotExample {
    std::string question;
    std::vector<std::string> answer_sentences;
    // unit text -> 1-based sentence number, in presentation order
    std::vector<std::pair<std::string, int>> good_units;
    std::vector<std::pair<std::string, int>> bad_units;
};

struct DecompositionStrategy {
    StrategyKind kind = StrategyKind::NIL;
    std::vector<FewShotExample> few_shot_examples;

    static DecompositionStrategy nil();
    static DecompositionStrategy factscore();
    /// Coarse-grained decomposition with good+bad exemplars. n_examples picks
    /// a prefix of the built-in example set (see default_cog_examples).
    static DecompositionStrategy cog(size_t n_examples = 1);
    static DecompositionStrategy cog_no_neg(size_t n_examples = 1);
    static DecompositionStrategy with_kind(StrategyKind kind, size_t n_examples = 1);
};

/// The built-in example set. Together the examples exercise every good- and
/// bad-unit instruction in the prompt schema; coverage is noted per example
/// in the README.
const std::vector<FewShotExample>& default_cog_examples();

/// Throws std::invalid_argument when the strategy violates its invariants
/// (CoG variants need at least one example; CoG needs bad-unit exemplars).
void validate_strategy(const DecompositionStrategy& strategy);

struct PartParseError {
    int part_index = 0;
    std::string message;
};

struct DecompositionResult {
    std::map<int, std::vector<InformationUnit>> per_sentence_units;  // one key per answer part
    std::string raw_response;
    StrategyKind strategy = StrategyKind::NIL;
    int dropped_units = 0;  // facts citing out-of-range sentence numbers
    std::vector<PartParseError> parse_errors;
    std::set<int> bypassed_parts;  // classifier-simple parts (non-NIL strategies)
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParsedDecomposition {
    std::map<int, std::vector<std::string>> units_per_part;  // 0-based part index
    int dropped = 0;
};

ChatRequest build_cog_prompt(const Question& question, const std::vector<AnswerPart>& parts,
                             const DecompositionStrategy& strategy,
                             const std::string& model_id, double temperature = 0.0);

ChatRequest build_factscore_prompt(const Question& question, const AnswerPart& part,
                                   const std::string& model_id, double temperature = 0.0);

/// Extracts the good-fact map from a decomposition response. Bad facts are
/// ignored; facts citing sentences outside [1, n_parts] are dropped and
/// counted. Throws ParseError when no fact map can be recovered.
ParsedDecomposition parse_decomposition(std::string_view raw, size_t n_parts);

/// Splits a single-sentence decomposition response into fact strings
/// (JSON array or bulleted lines). Throws ParseError when empty/unusable.
std::vector<std::string> parse_factscore_units(std::string_view raw);

/// Runs one record through the configured strategy. NIL never touches the
/// gateway; classifier-simple parts bypass it and become passthrough units;
/// a part whose response cannot be parsed falls back to passthrough with the
/// error recorded. Gateway errors propagate with record/part context.
DecompositionResult decompose(const TaskRecord& record, const DecompositionStrategy& strategy,
                              Gateway& gateway, const TaggerBackend& classifier);

double mean_units_per_sentence(const DecompositionResult& result);

// JSONL row: {record_id, strategy, per_sentence_units, drops, parse_errors}
nlohmann::json decomposition_to_json(const std::string& record_id, const DecompositionResult& result);
DecompositionResult decomposition_from_json(const nlohmann::json& row, std::string* record_id = nullptr);

}  // namespace attrkit
