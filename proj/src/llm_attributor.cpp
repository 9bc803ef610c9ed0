#include "attrkit/llm_attributor.hpp"

#include "attrkit/jsonish.hpp"
#include "attrkit/util.hpp"

#include <algorithm>
#include <set>

namespace attrkit {

using nlohmann::json;

std::string_view to_string(MatchKind kind) {
    switch (kind) {
        case MatchKind::exact: return "exact";
        case MatchKind::normalized: return "normalized";
        case MatchKind::fuzzy: return "fuzzy";
    }
    return "exact";
}

std::vector<EvidenceSentence> select_candidates(const TaskRecord& record, const UnitKey& key,
                                                const Bm25Index& index, int pool_size) {
    if (pool_size < 1) {
        throw std::invalid_argument("candidate pool size must be >= 1");
    }
    if (static_cast<int>(record.evidence.size()) <= pool_size) {
        return record.evidence;
    }
    std::string query;
    if (key.is_whole_answer()) {
        std::vector<std::string> texts;
        texts.reserve(record.answer_parts.size());
        for (const auto& part : record.answer_parts) texts.push_back(part.text);
        query = join(texts, " ");
    } else {
        query = record.answer_parts.at(static_cast<size_t>(*key.part_index)).text;
    }
    std::vector<ScoredEvidence> scores = bm25_scores(index, query);
    sort_by_rank(scores);
    std::vector<int> keep;
    keep.reserve(static_cast<size_t>(pool_size));
    for (int i = 0; i < pool_size; ++i) keep.push_back(scores[i].evidence_index);
    std::sort(keep.begin(), keep.end());  // present the pool in document order
    std::vector<EvidenceSentence> out;
    out.reserve(keep.size());
    for (int idx : keep) out.push_back(record.evidence[static_cast<size_t>(idx)]);
    return out;
}

ChatRequest build_attribution_prompt(const Question& question,
                                     const std::vector<AnswerPart>& answer_parts,
                                     const std::vector<InformationUnit>& units,
                                     const std::vector<EvidenceSentence>& candidates,
                                     const AttributorPromptConfig& config,
                                     const std::string& model_id, double temperature) {
    if (candidates.empty()) {
        throw std::invalid_argument("attribution prompt needs a non-empty candidate list");
    }

    std::string cap_rule = "Return a list of length 0, 1 or 2. Do not return more.";
    if (config.max_returned_per_call != 2) {
        cap_rule = "Return a list of length 0 to " + std::to_string(config.max_returned_per_call) +
                   ". Do not return more.";
    }

    std::string prompt =
        "Given a question, information units relevant to the question and retrieved evidences, "
        "retrieve sentences from the evidence which support the information units. The sentences "
        "which support the information unit will be considered attributions to the information "
        "unit. The sentence should provide a reasoning to the information unit, question and "
        "answer.\n\n"
        "Output a list of retrieved sentences. Output only a valid list and no other text. If no "
        "sentence is supported, return empty list []. Be precise in identifying sentences that "
        "support the information units by returning only highly relevant sentences. " +
        cap_rule +
        " DO NOT PARAPHRASE THE SENTENCES FROM THE RETRIEVED EVIDENCES. OUTPUT EXACT SENTENCES "
        "IN THE LIST. Sort the returned list based on the relevance to the information unit. The "
        "highly relevant evidence should appear as the first element.\n\n"
        "OUTPUT FORMAT: [\"sentence 23\", \"sentence 34\", \"sentence 40\"]\n\n";

    std::vector<std::string> part_texts;
    part_texts.reserve(answer_parts.size());
    for (const auto& part : answer_parts) part_texts.push_back(part.text);

    json units_json = json::array();
    for (const auto& unit : units) units_json.push_back(unit.text);
    json evidences_json = json::array();
    for (const auto& ev : candidates) evidences_json.push_back(ev.text);

    prompt += "QUESTION: " + question.text + "\n\n";
    prompt += "ANSWER: " + join(part_texts, " ") + "\n\n";
    prompt += "INFORMATION UNITS: " + units_json.dump() + "\n\n";
    prompt += "EVIDENCES: " + evidences_json.dump() + "\n\n";
    prompt += "Output a valid python list from now on\n\n";
    prompt += "OUTPUT LIST: ";

    return ChatRequest{model_id, {{ChatRole::user, std::move(prompt)}}, temperature};
}

ResolutionOutcome parse_and_resolve(std::string_view raw,
                                    const std::vector<EvidenceSentence>& candidates,
                                    double fuzzy_threshold) {
    if (candidates.empty()) {
        throw std::invalid_argument("parse_and_resolve needs a non-empty candidate list");
    }
    ResolutionOutcome outcome;

    std::string cleaned = strip_code_fences(raw);
    auto block = extract_balanced(cleaned, '[', ']');
    std::optional<nlohmann::ordered_json> parsed;
    if (block) parsed = parse_lenient(*block);
    if (!parsed || !parsed->is_array()) {
        outcome.parse_failed = true;
        return outcome;
    }

    std::vector<std::string> normalized_candidates;
    normalized_candidates.reserve(candidates.size());
    for (const auto& c : candidates) normalized_candidates.push_back(normalize_for_match(c.text));

    std::set<int> seen;
    for (const auto& item : *parsed) {
        if (!item.is_string()) {
            ++outcome.unresolved;
            continue;
        }
        std::string text = nfc(trim(item.get<std::string>()));
        std::optional<ResolvedEvidence> match;
        for (const auto& c : candidates) {
            if (c.text == text) {
                match = ResolvedEvidence{c.index, MatchKind::exact, 1.0};
                break;
            }
        }
        if (!match) {
            std::string norm = normalize_for_match(text);
            for (size_t i = 0; i < candidates.size(); ++i) {
                if (normalized_candidates[i] == norm) {
                    match = ResolvedEvidence{candidates[i].index, MatchKind::normalized, 1.0};
                    break;
                }
            }
            if (!match) {
                double best = -1.0;
                int best_index = -1;
                for (size_t i = 0; i < candidates.size(); ++i) {
                    double sim = levenshtein_similarity(norm, normalized_candidates[i]);
                    if (sim > best) {
                        best = sim;
                        best_index = candidates[i].index;
                    }
                }
                if (best >= fuzzy_threshold) {
                    match = ResolvedEvidence{best_index, MatchKind::fuzzy, best};
                }
            }
        }
        if (!match) {
            ++outcome.unresolved;
            continue;
        }
        if (seen.insert(match->evidence_index).second) {
            outcome.resolved.push_back(*match);
        }
    }
    return outcome;
}

std::vector<InformationUnit> units_for_key(const DecompositionResult& decomposition,
                                           const UnitKey& key) {
    std::vector<InformationUnit> units;
    if (key.is_whole_answer()) {
        for (const auto& [index, list] : decomposition.per_sentence_units) {
            units.insert(units.end(), list.begin(), list.end());
        }
    } else {
        auto it = decomposition.per_sentence_units.find(*key.part_index);
        if (it != decomposition.per_sentence_units.end()) {
            units = it->second;
        }
    }
    return units;
}

namespace {

void append_resolution(KeyAttribution& result, const ResolutionOutcome& outcome, int cap) {
    int kept = 0;
    for (const auto& re : outcome.resolved) {
        if (kept >= cap) break;
        bool duplicate = std::any_of(result.resolved.begin(), result.resolved.end(),
                                     [&](const ResolvedEvidence& r) {
                                         return r.evidence_index == re.evidence_index;
                                     });
        ++kept;
        if (!duplicate) result.resolved.push_back(re);
    }
    result.unresolved += outcome.unresolved;
}

}  // namespace

KeyAttribution attribute_unit_key(const TaskRecord& record, const UnitKey& key,
                                  const DecompositionResult& decomposition, Gateway& gateway,
                                  const AttributorPromptConfig& config, const Bm25Index& index) {
    KeyAttribution result;
    result.set.unit_key = key;

    std::vector<InformationUnit> units = units_for_key(decomposition, key);
    if (units.empty()) {
        return result;  // nothing attributable for this key, no call
    }
    std::vector<EvidenceSentence> candidates =
        select_candidates(record, key, index, config.candidate_pool_size);

    std::vector<std::vector<InformationUnit>> batches;
    if (config.per_unit_calls) {
        for (const auto& unit : units) batches.push_back({unit});
    } else {
        batches.push_back(units);
    }

    for (const auto& batch : batches) {
        ChatRequest request =
            build_attribution_prompt(record.question, record.answer_parts, batch, candidates,
                                     config, gateway.config().model);
        ChatResponse response;
        try {
            response = gateway.complete(request);
        } catch (const GatewayError& e) {
            if (e.kind == GatewayErrorKind::cache_miss) {
                throw GatewayError(e.kind, "record " + record.id + " key " + key.to_string() +
                                               ": " + e.what(), e.status, e.body);
            }
            result.failures.push_back("gateway: " + std::string(e.what()));
            continue;
        }
        ResolutionOutcome outcome =
            parse_and_resolve(response.content, candidates, config.fuzzy_threshold);
        if (outcome.parse_failed) {
            result.failures.push_back("parse: response is not a bracketed list");
        }
        append_resolution(result, outcome, config.max_returned_per_call);
    }

    for (size_t rank = 0; rank < result.resolved.size(); ++rank) {
        result.set.evidences.push_back(ScoredEvidence{
            1.0 / static_cast<double>(rank + 1), result.resolved[rank].evidence_index});
    }
    return result;
}

KeyAttribution attribute_unit_key(const TaskRecord& record, const UnitKey& key,
                                  const DecompositionResult& decomposition, Gateway& gateway,
                                  const AttributorPromptConfig& config) {
    Bm25Index index = build_index(record.evidence);
    return attribute_unit_key(record, key, decomposition, gateway, config, index);
}

}  // namespace attrkit
