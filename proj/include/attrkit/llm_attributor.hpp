#pragma once

#include "attrkit/decomposer.hpp"
#include "attrkit/gateway.hpp"
#include "attrkit/retriever.hpp"
#include "attrkit/types.hpp"

#include <string>
#include <vector>

namespace attrkit {

struct AttributorPromptConfig {
    int candidate_pool_size = 100;
    /// Cap on evidences kept per call, enforced by truncation after
    /// resolution. The shipped prompt states the 0/1/2 rule; other caps
    /// adapt that one sentence.
    int max_returned_per_call = 2;
    double fuzzy_threshold = 0.9;
    bool per_unit_calls = false;  // default: one call per unit key, units batched
};

enum class MatchKind { exact, normalized, fuzzy };

std::string_view to_string(MatchKind kind);

struct ResolvedEvidence {
    int evidence_index = 0;
    MatchKind match_kind = MatchKind::exact;
    double similarity = 1.0;
};

struct ResolutionOutcome {
    std::vector<ResolvedEvidence> resolved;  // relevance order, duplicates collapsed
    int unresolved = 0;                      // strings that matched no candidate
    bool parse_failed = false;
};

/// Top pool-size evidences by BM25 against the unit key's answer-sentence
/// text (never the decomposed units, so the pool is identical across
/// strategies). Returned in document order; documents at or under the pool
/// size come back whole.
std::vector<EvidenceSentence> select_candidates(const TaskRecord& record, const UnitKey& key,
                                                const Bm25Index& index, int pool_size = 100);

ChatRequest build_attribution_prompt(const Question& question,
                                     const std::vector<AnswerPart>& answer_parts,
                                     const std::vector<InformationUnit>& units,
                                     const std::vector<EvidenceSentence>& candidates,
                                     const AttributorPromptConfig& config,
                                     const std::string& model_id, double temperature = 0.0);

/// Parses the bracketed string list and resolves each string to a candidate:
/// exact match, then normalized (casefold/whitespace/terminal punctuation),
/// then fuzzy Levenshtein at or above the threshold. Unresolved strings are
/// dropped and counted; duplicates keep their first (most relevant) slot.
ResolutionOutcome parse_and_resolve(std::string_view raw,
                                    const std::vector<EvidenceSentence>& candidates,
                                    double fuzzy_threshold = 0.9);

struct KeyAttribution {
    AttributionSet set;  // pseudo-scores 1/(rank+1); only order is meaningful
    std::vector<ResolvedEvidence> resolved;
    int unresolved = 0;
    std::vector<std::string> failures;  // recorded gateway/parse failures
};

/// One gateway call per unit key (or per unit when configured). Transport
/// and HTTP failures are recorded and leave an empty set so a batch run can
/// continue; a replay cache miss still propagates, since it means the
/// recorded fixtures do not cover this run.
KeyAttribution attribute_unit_key(const TaskRecord& record, const UnitKey& key,
                                  const DecompositionResult& decomposition, Gateway& gateway,
                                  const AttributorPromptConfig& config, const Bm25Index& index);

/// Convenience overload building the BM25 candidate index on the fly.
KeyAttribution attribute_unit_key(const TaskRecord& record, const UnitKey& key,
                                  const DecompositionResult& decomposition, Gateway& gateway,
                                  const AttributorPromptConfig& config = {});

/// Units attached to a key: the part's own units for a sentence key, or
/// every part's units in answer order for the whole-answer key.
std::vector<InformationUnit> units_for_key(const DecompositionResult& decomposition,
                                           const UnitKey& key);

}  // namespace attrkit
