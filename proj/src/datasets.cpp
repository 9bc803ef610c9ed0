#include "attrkit/datasets.hpp"

#include "attrkit/text.hpp"
#include "attrkit/util.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace attrkit {

using nlohmann::json;

json IngestionStats::to_json() const {
    return json{{"records_in", records_in},
                {"records_out", records_out},
                {"excluded_exact_match", excluded_exact_match},
                {"dropped_invalid", dropped_invalid},
                {"notes", notes},
                {"drop_reasons", drop_reasons}};
}

json record_to_json(const TaskRecord& record) {
    json parts = json::array();
    for (const auto& part : record.answer_parts) parts.push_back(part.text);
    json evidence = json::array();
    for (const auto& ev : record.evidence) evidence.push_back(ev.text);
    json gold = json::array();
    for (const auto& entry : record.gold) {
        json key = entry.unit_key.is_whole_answer() ? json("answer") : json(*entry.unit_key.part_index);
        gold.push_back({{"unit_key", std::move(key)},
                        {"evidence_indices", entry.evidence_indices}});
    }
    return json{{"id", record.id},
                {"dataset", record.dataset_tag},
                {"granularity", std::string(to_string(record.granularity))},
                {"question", json{{"id", record.question.id}, {"text", record.question.text}}},
                {"answer_parts", std::move(parts)},
                {"evidence", std::move(evidence)},
                {"gold", std::move(gold)}};
}

TaskRecord record_from_json(const json& row) {
    TaskRecord record;
    record.id = row.at("id").get<std::string>();
    record.dataset_tag = row.value("dataset", std::string());
    auto granularity = granularity_from_string(row.at("granularity").get<std::string>());
    if (!granularity) {
        throw DataError("record " + record.id + ": unknown granularity");
    }
    record.granularity = *granularity;
    const json& q = row.at("question");
    record.question = Question(q.value("id", record.id), q.at("text").get<std::string>());
    int index = 0;
    for (const auto& text : row.at("answer_parts")) {
        record.answer_parts.emplace_back(index++, text.get<std::string>());
    }
    index = 0;
    for (const auto& text : row.at("evidence")) {
        record.evidence.emplace_back(index++, text.get<std::string>());
    }
    for (const auto& entry : row.at("gold")) {
        GoldEntry gold;
        const json& key = entry.at("unit_key");
        if (key.is_string()) {
            auto parsed = UnitKey::parse(key.get<std::string>());
            if (!parsed) throw DataError("record " + record.id + ": bad unit_key");
            gold.unit_key = *parsed;
        } else {
            gold.unit_key = UnitKey::part(key.get<int>());
        }
        for (const auto& idx : entry.at("evidence_indices")) {
            gold.evidence_indices.insert(idx.get<int>());
        }
        record.gold.push_back(std::move(gold));
    }
    return record;
}

LoadResult load_records_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open records file: " + path.string());
    }
    LoadResult result;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ++result.stats.records_in;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (row.is_discarded()) {
            ++result.stats.dropped_invalid;
            result.stats.drop_reasons.push_back("line " + std::to_string(lineno) + ": invalid JSON");
            continue;
        }
        try {
            TaskRecord record = record_from_json(row);
            auto violations = validate_record(record);
            if (!violations.empty()) {
                throw DataError(join(violations, "; "));
            }
            result.records.push_back(std::move(record));
            ++result.stats.records_out;
        } catch (const std::exception& e) {
            ++result.stats.dropped_invalid;
            result.stats.drop_reasons.push_back("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return result;
}

void save_records_jsonl(const std::vector<TaskRecord>& records,
                        const std::filesystem::path& path) {
    std::string out;
    for (const auto& record : records) {
        out += record_to_json(record).dump();
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

namespace {

json parse_file_json(const std::filesystem::path& path) {
    json parsed = json::parse(read_text_file(path), nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) {
        throw DataError("file is not valid JSON: " + path.string());
    }
    return parsed;
}

// Accepts either one top-level JSON array or JSONL.
std::vector<json> load_entries(const std::filesystem::path& path) {
    std::string content = read_text_file(path);
    json parsed = json::parse(content, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_array()) {
        return std::vector<json>(parsed.begin(), parsed.end());
    }
    std::vector<json> entries;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        entries.push_back(row.is_discarded() ? json() : std::move(row));
    }
    if (entries.empty()) {
        throw DataError("no records found in " + path.string());
    }
    return entries;
}

}  // namespace

LoadResult load_verifiability(const std::filesystem::path& path) {
    LoadResult result;
    for (const auto& entry : load_entries(path)) {
        ++result.stats.records_in;
        try {
            if (!entry.is_object()) throw DataError("entry is not an object");
            TaskRecord record;
            record.granularity = Granularity::per_sentence;
            record.dataset_tag = "verifiability";
            record.id = entry.at("id").is_string() ? entry.at("id").get<std::string>()
                                                   : entry.at("id").dump();
            record.question = Question(record.id, entry.at("question").get<std::string>());

            int index = 0;
            for (const auto& sentence : entry.at("answer_sentences")) {
                record.answer_parts.emplace_back(index++, sentence.get<std::string>());
            }
            if (record.answer_parts.empty()) throw DataError("no answer sentences");

            std::vector<std::string> source;
            if (entry.contains("source_sentences")) {  // pre-split wins
                for (const auto& s : entry.at("source_sentences")) {
                    source.push_back(s.get<std::string>());
                }
            } else if (entry.contains("source_text")) {
                source = split_sentences(entry.at("source_text").get<std::string>());
            } else {
                throw DataError("neither source_sentences nor source_text present");
            }
            index = 0;
            for (const auto& s : source) record.evidence.emplace_back(index++, s);
            if (record.evidence.empty()) throw DataError("no source sentences");

            // One gold entry per answer sentence; only fully supported
            // annotations contribute evidence indices.
            std::map<int, std::set<int>> gold;
            for (const auto& part : record.answer_parts) gold[part.index] = {};
            if (entry.contains("annotations")) {
                for (const auto& ann : entry.at("annotations")) {
                    int part = ann.at("answer_index").get<int>();
                    if (part < 0 || part >= static_cast<int>(record.answer_parts.size())) {
                        throw DataError("annotation references answer sentence " +
                                        std::to_string(part));
                    }
                    if (ann.value("support", "") != "full") continue;
                    for (const auto& idx : ann.at("supporting_sentences")) {
                        int i = idx.get<int>();
                        if (i < 0 || i >= static_cast<int>(record.evidence.size())) {
                            throw DataError("annotation cites missing source sentence " +
                                            std::to_string(i));
                        }
                        gold[part].insert(i);
                    }
                }
            }
            for (auto& [key, indices] : gold) {
                record.gold.push_back(GoldEntry{UnitKey::part(key), std::move(indices)});
            }

            auto violations = validate_record(record);
            if (!violations.empty()) throw DataError(join(violations, "; "));
            result.records.push_back(std::move(record));
            ++result.stats.records_out;
        } catch (const std::exception& e) {
            ++result.stats.dropped_invalid;
            result.stats.drop_reasons.push_back("entry " + std::to_string(result.stats.records_in) +
                                                ": " + e.what());
        }
    }
    return result;
}

LoadResult load_qasper(const std::filesystem::path& path) {
    json papers = parse_file_json(path);
    if (!papers.is_object()) {
        throw DataError("expected a paper_id -> paper object mapping");
    }
    LoadResult result;
    for (const auto& [paper_id, paper] : papers.items()) {
        // Flatten the full text to ordered evidence sentences once per paper.
        std::vector<EvidenceSentence> evidence;
        std::unordered_map<std::string, int> sentence_lookup;  // normalized -> first index
        auto add_sentences = [&](const std::string& text) {
            for (const auto& sentence : split_sentences(text)) {
                EvidenceSentence ev(static_cast<int>(evidence.size()), sentence);
                sentence_lookup.try_emplace(normalize_for_exclusion(ev.text),
                                            ev.index);
                evidence.push_back(std::move(ev));
            }
        };
        if (paper.contains("full_text")) {
            for (const auto& section : paper.at("full_text")) {
                for (const auto& paragraph : section.value("paragraphs", json::array())) {
                    if (paragraph.is_string()) add_sentences(paragraph.get<std::string>());
                }
            }
        }

        for (const auto& qa : paper.value("qas", json::array())) {
            std::string question_id = qa.value("question_id", paper_id);
            std::string question_text = qa.value("question", std::string());
            const json& answers = qa.value("answers", json::array());
            int answer_no = 0;
            for (const auto& wrapper : answers) {
                const json& answer = wrapper.contains("answer") ? wrapper.at("answer") : wrapper;
                ++answer_no;
                if (answer.value("unanswerable", false)) {
                    ++result.stats.notes["skipped_unanswerable"];
                    continue;
                }
                ++result.stats.records_in;
                try {
                    std::string answer_text = answer.value("free_form_answer", std::string());
                    if (trim(answer_text).empty() && answer.contains("yes_no") &&
                        !answer.at("yes_no").is_null()) {
                        answer_text = answer.at("yes_no").get<bool>() ? "Yes." : "No.";
                    }
                    if (trim(answer_text).empty() && answer.contains("extractive_spans")) {
                        std::vector<std::string> spans;
                        for (const auto& span : answer.at("extractive_spans")) {
                            spans.push_back(span.get<std::string>());
                        }
                        answer_text = join(spans, " ");
                    }
                    if (trim(answer_text).empty()) throw DataError("answer has no text");
                    if (evidence.empty()) throw DataError("paper has no full text");

                    TaskRecord record;
                    record.granularity = Granularity::per_answer;
                    record.dataset_tag = "qasper";
                    record.id = answers.size() > 1
                                    ? question_id + "#" + std::to_string(answer_no)
                                    : question_id;
                    record.question = Question(question_id, question_text);
                    int index = 0;
                    for (const auto& sentence : split_sentences(answer_text)) {
                        record.answer_parts.emplace_back(index++, sentence);
                    }
                    if (record.answer_parts.empty()) throw DataError("answer has no sentences");
                    record.evidence = evidence;

                    GoldEntry gold;
                    gold.unit_key = UnitKey::whole_answer();
                    bool extractive_match = false;
                    for (const auto& ev_text : answer.value("evidence", json::array())) {
                        if (!ev_text.is_string()) continue;
                        for (const auto& sentence : split_sentences(ev_text.get<std::string>())) {
                            auto it = sentence_lookup.find(
                                normalize_for_exclusion(nfc(sentence)));
                            if (it != sentence_lookup.end()) {
                                gold.evidence_indices.insert(it->second);
                            } else {
                                ++result.stats.notes["unmatched_gold_evidence"];
                            }
                        }
                    }
                    for (const auto& part : record.answer_parts) {
                        if (sentence_lookup.count(normalize_for_exclusion(part.text)) > 0) {
                            extractive_match = true;
                        }
                    }
                    if (extractive_match) {
                        ++result.stats.notes["flagged_exact_match"];
                    }
                    record.gold.push_back(std::move(gold));

                    auto violations = validate_record(record);
                    if (!violations.empty()) throw DataError(join(violations, "; "));
                    result.records.push_back(std::move(record));
                    ++result.stats.records_out;
                } catch (const std::exception& e) {
                    ++result.stats.dropped_invalid;
                    result.stats.drop_reasons.push_back(question_id + "#" +
                                                        std::to_string(answer_no) + ": " + e.what());
                }
            }
        }
    }
    return result;
}

std::pair<std::vector<TaskRecord>, IngestionStats> apply_exclusions(
    const std::vector<TaskRecord>& records) {
    IngestionStats stats;
    std::vector<TaskRecord> kept;
    for (const auto& record : records) {
        ++stats.records_in;
        std::set<std::string> evidence_norms;
        for (const auto& ev : record.evidence) {
            evidence_norms.insert(normalize_for_exclusion(ev.text));
        }
        auto part_matches = [&](int index) {
            return evidence_norms.count(
                       normalize_for_exclusion(record.answer_parts[static_cast<size_t>(index)].text)) > 0;
        };

        if (record.granularity == Granularity::per_answer) {
            bool any_match = std::any_of(record.answer_parts.begin(), record.answer_parts.end(),
                                         [&](const AnswerPart& p) { return part_matches(p.index); });
            if (any_match) {
                ++stats.excluded_exact_match;
                ++stats.notes["excluded_unit_keys"];
                continue;
            }
            kept.push_back(record);
            ++stats.records_out;
            continue;
        }

        TaskRecord pruned = record;
        pruned.gold.clear();
        for (const auto& entry : record.gold) {
            if (!entry.unit_key.is_whole_answer() && part_matches(*entry.unit_key.part_index)) {
                ++stats.notes["excluded_unit_keys"];
                continue;
            }
            pruned.gold.push_back(entry);
        }
        if (pruned.gold.empty()) {
            ++stats.excluded_exact_match;
            continue;
        }
        kept.push_back(std::move(pruned));
        ++stats.records_out;
    }
    return {std::move(kept), std::move(stats)};
}

}  // namespace attrkit
