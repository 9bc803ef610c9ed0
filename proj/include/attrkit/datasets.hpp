#pragma once

#include "attrkit/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace attrkit {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IngestionStats {
    int records_in = 0;
    int records_out = 0;
    int excluded_exact_match = 0;
    int dropped_invalid = 0;
    // Auxiliary counters outside the conservation identity (unanswerable
    // skips, per-unit-key exclusions, unmatched gold evidence, ...).
    std::map<std::string, int> notes;
    std::vector<std::string> drop_reasons;

    nlohmann::json to_json() const;
};

struct LoadResult {
    std::vector<TaskRecord> records;
    IngestionStats stats;
};

// Canonical interchange format: one TaskRecord per JSONL line.
// {"id","dataset","granularity","question":{"id","text"},"answer_parts":[...],
//  "evidence":[...],"gold":[{"unit_key","evidence_indices":[...]}]}
// unit_key is an integer part index or the string "answer".
nlohmann::json record_to_json(const TaskRecord& record);
TaskRecord record_from_json(const nlohmann::json& row);

LoadResult load_records_jsonl(const std::filesystem::path& path);
void save_records_jsonl(const std::vector<TaskRecord>& records, const std::filesystem::path& path);

/// Verifiability-style input (JSON array or JSONL). Every answer sentence
/// receives a gold entry; only fully supported annotations contribute
/// evidence indices. Pre-split source sentences win over raw source text.
LoadResult load_verifiability(const std::filesystem::path& path);

/// QASPER-style input (paper_id -> {title, abstract, full_text, qas}).
/// Paper full text flattens to ordered evidence sentences; gold is the union
/// of the answer's supporting-evidence sentences located in the document.
/// Unanswerable questions are skipped and counted.
LoadResult load_qasper(const std::filesystem::path& path);

/// The exact-match exclusion rule: an answer sentence that string-equals an
/// evidence sentence (after NFC + casefold + whitespace normalization;
/// punctuation kept) excludes its gold entry (per-sentence granularity) or
/// its whole record (per-answer). Records left without gold entries drop.
std::pair<std::vector<TaskRecord>, IngestionStats> apply_exclusions(
    const std::vector<TaskRecord>& records);

}  // namespace attrkit
