#include "attrkit/types.hpp"

#include "attrkit/util.hpp"

#include <algorithm>
#include <charconv>
#include <map>

namespace attrkit {

Question::Question(std::string id_, std::string_view text_)
    : id(std::move(id_)), text(nfc(text_)) {}

EvidenceSentence::EvidenceSentence(int index_, std::string_view text_)
    : index(index_), text(nfc(text_)) {}

AnswerPart::AnswerPart(int index_, std::string_view text_)
    : index(index_), text(nfc(text_)) {}

InformationUnit::InformationUnit(std::string_view text_, int source_part_index_, UnitOrigin origin_)
    : text(nfc(text_)), source_part_index(source_part_index_), origin(origin_) {}

void sort_by_rank(std::vector<ScoredEvidence>& evidences) {
    std::stable_sort(evidences.begin(), evidences.end(), ranks_before);
}

std::string UnitKey::to_string() const {
    return is_whole_answer() ? std::string("answer") : std::to_string(*part_index);
}

std::optional<UnitKey> UnitKey::parse(std::string_view s) {
    if (s == "answer") return whole_answer();
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || value < 0) return std::nullopt;
    return part(value);
}

std::string_view to_string(Granularity g) {
    return g == Granularity::per_sentence ? "per_sentence" : "per_answer";
}

std::optional<Granularity> granularity_from_string(std::string_view s) {
    if (s == "per_sentence") return Granularity::per_sentence;
    if (s == "per_answer") return Granularity::per_answer;
    return std::nullopt;
}

std::vector<std::string> validate_record(const TaskRecord& record,
                                         const SentenceCounter& count_sentences) {
    std::vector<std::string> violations;
    auto add = [&](std::string msg) { violations.push_back(std::move(msg)); };

    if (trim(record.question.text).empty()) {
        add("question text is empty");
    }

    for (size_t i = 0; i < record.evidence.size(); ++i) {
        const auto& ev = record.evidence[i];
        if (ev.index != static_cast<int>(i)) {
            add("evidence indices not contiguous from 0: position " + std::to_string(i) +
                " has index " + std::to_string(ev.index));
        }
        if (ev.text.empty()) {
            add("evidence " + std::to_string(ev.index) + " has empty text");
        }
    }

    for (size_t i = 0; i < record.answer_parts.size(); ++i) {
        const auto& part = record.answer_parts[i];
        if (part.index != static_cast<int>(i)) {
            add("answer part indices not contiguous from 0: position " + std::to_string(i) +
                " has index " + std::to_string(part.index));
        }
        if (trim(part.text).empty()) {
            add("answer part " + std::to_string(part.index) + " has empty text");
        } else if (count_sentences && count_sentences(part.text) > 1) {
            add("answer part " + std::to_string(part.index) + " spans multiple sentences");
        }
    }

    const int n_evidence = static_cast<int>(record.evidence.size());
    const int n_parts = static_cast<int>(record.answer_parts.size());
    std::map<UnitKey, int> key_counts;
    for (const auto& entry : record.gold) {
        ++key_counts[entry.unit_key];
        if (record.granularity == Granularity::per_sentence) {
            if (entry.unit_key.is_whole_answer()) {
                add("per_sentence record has a whole-answer gold key");
            } else if (*entry.unit_key.part_index < 0 || *entry.unit_key.part_index >= n_parts) {
                add("gold key references missing answer part " +
                    std::to_string(*entry.unit_key.part_index));
            }
        } else if (!entry.unit_key.is_whole_answer()) {
            add("per_answer record has a per-sentence gold key");
        }
        for (int idx : entry.evidence_indices) {
            if (idx < 0 || idx >= n_evidence) {
                add("gold for key " + entry.unit_key.to_string() +
                    " references missing evidence " + std::to_string(idx));
            }
        }
    }
    for (const auto& [key, count] : key_counts) {
        if (count > 1) {
            add("duplicate gold key " + key.to_string());
        }
    }
    if (record.granularity == Granularity::per_answer && record.gold.size() != 1) {
        add("per_answer record must have exactly one gold key, found " +
            std::to_string(record.gold.size()));
    }

    return violations;
}

}  // namespace attrkit
