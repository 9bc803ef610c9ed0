#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace attrkit {

// Core domain model. All values are immutable after construction and all
// text fields are stored NFC-normalized, so string identity downstream
// (evidence resolution, exclusion matching) sees one canonical form.

struct Question {
    std::string id;
    std::string text;

    Question() = default;
    Question(std::string id_, std::string_view text_);
};

struct EvidenceSentence {
    int index = 0;  // 0-based position within the document
    std::string text;

    EvidenceSentence() = default;
    EvidenceSentence(int index_, std::string_view text_);
};

struct AnswerPart {
    int index = 0;  // 0-based position within the answer
    std::string text;  // one sentence

    AnswerPart() = default;
    AnswerPart(int index_, std::string_view text_);
};

enum class UnitOrigin { decomposed, passthrough };

struct InformationUnit {
    std::string text;
    int source_part_index = 0;
    UnitOrigin origin = UnitOrigin::decomposed;

    InformationUnit() = default;
    InformationUnit(std::string_view text_, int source_part_index_, UnitOrigin origin_);
};

struct ScoredEvidence {
    double score = 0.0;  // higher = more relevant; log-prob scorers may be negative
    int evidence_index = 0;
};

/// Ordering used everywhere a ranked evidence list is produced: score
/// descending, ties broken by lower evidence index.
inline bool ranks_before(const ScoredEvidence& a, const ScoredEvidence& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.evidence_index < b.evidence_index;
}

void sort_by_rank(std::vector<ScoredEvidence>& evidences);

/// Either one answer-part index (per-sentence granularity) or the
/// distinguished whole-answer marker (per-answer granularity).
struct UnitKey {
    static UnitKey part(int index) { return UnitKey{index}; }
    static UnitKey whole_answer() { return UnitKey{std::nullopt}; }

    bool is_whole_answer() const { return !part_index.has_value(); }

    std::optional<int> part_index;

    auto operator<=>(const UnitKey&) const = default;

    std::string to_string() const;
    /// Parses "answer" or a decimal part index (inverse of to_string).
    static std::optional<UnitKey> parse(std::string_view s);
};

struct AttributionSet {
    UnitKey unit_key;
    std::vector<ScoredEvidence> evidences;  // sorted by ranks_before, indices unique
};

enum class Granularity { per_sentence, per_answer };

std::string_view to_string(Granularity g);
std::optional<Granularity> granularity_from_string(std::string_view s);

struct GoldEntry {
    UnitKey unit_key;
    std::set<int> evidence_indices;  // may be empty: the unit needs no attribution
};

struct TaskRecord {
    std::string id;
    Question question;
    std::vector<AnswerPart> answer_parts;
    std::vector<EvidenceSentence> evidence;
    std::vector<GoldEntry> gold;
    Granularity granularity = Granularity::per_sentence;
    std::string dataset_tag;
};

/// Counts sentences in a text; used by validate_record to check that each
/// answer part is a single sentence. Injected to keep this module free of a
/// dependency on the segmenter.
using SentenceCounter = std::function<size_t(std::string_view)>;

/// Checks every type invariant and returns one human-readable violation per
/// failure, empty when the record is well-formed. Pure: never mutates input.
std::vector<std::string> validate_record(const TaskRecord& record,
                                         const SentenceCounter& count_sentences = nullptr);

}  // namespace attrkit
