#include "attrkit/pipeline.hpp"

#include "attrkit/util.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace attrkit {

using nlohmann::json;

namespace {

template <typename T>
T get_at(const json& tree, const std::string& dotted, T fallback) {
    const json* node = &tree;
    size_t start = 0;
    while (true) {
        size_t dot = dotted.find('.', start);
        std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos
                                                                        : dot - start);
        auto it = node->find(key);
        if (it == node->end()) return fallback;
        node = &*it;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    try {
        return node->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + dotted + "' has the wrong type");
    }
}

std::string iso_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& tree) {
    PipelineConfig c;
    c.records_path = get_at<std::string>(tree, "data.records", c.records_path);
    c.output_dir = get_at<std::string>(tree, "data.output_dir", c.output_dir);
    c.strategy = get_at<std::string>(tree, "decomposer.strategy", c.strategy);
    c.cog_examples = get_at<int>(tree, "decomposer.cog_examples", c.cog_examples);
    c.retriever_kind = get_at<std::string>(tree, "retriever.kind", c.retriever_kind);
    c.bm25_k1 = get_at<double>(tree, "retriever.bm25.k1", c.bm25_k1);
    c.bm25_b = get_at<double>(tree, "retriever.bm25.b", c.bm25_b);
    c.retriever_endpoint = get_at<std::string>(tree, "retriever.endpoint", c.retriever_endpoint);
    c.embedding_cosine = get_at<bool>(tree, "retriever.cosine", c.embedding_cosine);
    c.attributor = get_at<std::string>(tree, "attributor.kind", c.attributor);
    c.candidate_pool_size = get_at<int>(tree, "attributor.pool_size", c.candidate_pool_size);
    c.max_returned = get_at<int>(tree, "attributor.max_returned", c.max_returned);
    c.fuzzy_threshold = get_at<double>(tree, "attributor.fuzzy_threshold", c.fuzzy_threshold);
    c.per_unit_calls = get_at<bool>(tree, "attributor.per_unit_calls", c.per_unit_calls);
    c.llm_endpoint = get_at<std::string>(tree, "llm.endpoint", c.llm_endpoint);
    c.llm_model = get_at<std::string>(tree, "llm.model", c.llm_model);
    c.llm_mode = get_at<std::string>(tree, "llm.mode", c.llm_mode);
    c.llm_max_in_flight = get_at<int>(tree, "llm.max_in_flight", c.llm_max_in_flight);
    c.llm_max_retries = get_at<int>(tree, "llm.max_retries", c.llm_max_retries);
    c.api_key_env = get_at<std::string>(tree, "llm.api_key_env", c.api_key_env);
    c.cache_dir = get_at<std::string>(tree, "cache.dir", c.cache_dir);
    c.k_values = get_at<std::vector<int>>(tree, "evaluation.k", c.k_values);
    c.micro_average = get_at<bool>(tree, "evaluation.micro", c.micro_average);
    c.seed = get_at<uint64_t>(tree, "seed", c.seed);
    return c;
}

json PipelineConfig::to_json() const {
    return json{
        {"data", {{"records", records_path}, {"output_dir", output_dir}}},
        {"decomposer", {{"strategy", strategy}, {"cog_examples", cog_examples}}},
        {"retriever",
         {{"kind", retriever_kind},
          {"bm25", {{"k1", bm25_k1}, {"b", bm25_b}}},
          {"endpoint", retriever_endpoint},
          {"cosine", embedding_cosine}}},
        {"attributor",
         {{"kind", attributor},
          {"pool_size", candidate_pool_size},
          {"max_returned", max_returned},
          {"fuzzy_threshold", fuzzy_threshold},
          {"per_unit_calls", per_unit_calls}}},
        {"llm",
         {{"endpoint", llm_endpoint},
          {"model", llm_model},
          {"mode", llm_mode},
          {"max_in_flight", llm_max_in_flight},
          {"max_retries", llm_max_retries},
          {"api_key_env", api_key_env}}},
        {"cache", {{"dir", cache_dir}}},
        {"evaluation", {{"k", k_values}, {"micro", micro_average}}},
        {"seed", seed}};
}

void PipelineConfig::validate() const {
    if (!strategy_from_string(strategy)) {
        throw ConfigError("unknown decomposer.strategy '" + strategy + "'");
    }
    if (!scorer_kind_from_string(retriever_kind)) {
        throw ConfigError("unknown retriever.kind '" + retriever_kind + "'");
    }
    if (attributor != "bm25" && attributor != "embedding" && attributor != "cross_encoder" &&
        attributor != "llm") {
        throw ConfigError("unknown attributor.kind '" + attributor + "'");
    }
    if (!gateway_mode_from_string(llm_mode)) {
        throw ConfigError("unknown llm.mode '" + llm_mode + "'");
    }
    if (attributor != "llm" && k_values.empty()) {
        throw ConfigError("evaluation.k must be non-empty for retrieval attributors");
    }
    for (int k : k_values) {
        if (k < 1) throw ConfigError("evaluation.k values must be >= 1");
    }
    if (candidate_pool_size < 1) {
        throw ConfigError("attributor.pool_size must be >= 1");
    }
    if (max_returned < 0) {
        throw ConfigError("attributor.max_returned must be >= 0");
    }
    if (fuzzy_threshold < 0.0 || fuzzy_threshold > 1.0) {
        throw ConfigError("attributor.fuzzy_threshold must be in [0,1]");
    }
    if ((attributor == "embedding" || attributor == "cross_encoder" ||
         retriever_kind != "bm25") &&
        retriever_endpoint.empty() && attributor != "bm25" && attributor != "llm") {
        throw ConfigError("retriever.endpoint required for service-backed scorers");
    }
    if (bm25_k1 < 0.0 || bm25_b < 0.0 || bm25_b > 1.0) {
        throw ConfigError("retriever.bm25 parameters out of range");
    }
}

json load_config_tree(const std::filesystem::path& path) {
    json tree = json::parse(read_text_file(path), nullptr, /*allow_exceptions=*/false);
    if (tree.is_discarded() || !tree.is_object()) {
        throw ConfigError("config file is not a JSON object: " + path.string());
    }
    return tree;
}

void apply_override(json& tree, std::string_view assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("override must look like key.path=value: " + std::string(assignment));
    }
    std::string path(assignment.substr(0, eq));
    std::string raw(assignment.substr(eq + 1));
    json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = raw;  // unquoted strings stay strings

    json* node = &tree;
    size_t start = 0;
    while (true) {
        size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? std::string::npos
                                                                      : dot - start);
        if (key.empty()) throw ConfigError("empty key segment in override: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            break;
        }
        if (!node->contains(key) || !(*node)[key].is_object()) {
            (*node)[key] = json::object();
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

json AttributionRow::to_json() const {
    json evidences_json = json::array();
    for (size_t i = 0; i < evidences.size(); ++i) {
        json item{{"index", evidences[i].evidence_index}, {"score", evidences[i].score}};
        if (i < resolution.size()) {
            item["match_kind"] = std::string(to_string(resolution[i].match_kind));
            item["similarity"] = resolution[i].similarity;
        }
        evidences_json.push_back(std::move(item));
    }
    json key = unit_key.is_whole_answer() ? json("answer") : json(*unit_key.part_index);
    return json{{"record_id", record_id}, {"unit_key", std::move(key)},
                {"strategy", strategy},   {"attributor", attributor},
                {"evidences", std::move(evidences_json)}, {"failures", failures}};
}

AttributionRow AttributionRow::from_json(const json& row) {
    AttributionRow out;
    out.record_id = row.at("record_id").get<std::string>();
    const json& key = row.at("unit_key");
    if (key.is_string()) {
        auto parsed = UnitKey::parse(key.get<std::string>());
        if (!parsed) throw DataError("bad unit_key in attribution row");
        out.unit_key = *parsed;
    } else {
        out.unit_key = UnitKey::part(key.get<int>());
    }
    out.strategy = row.value("strategy", std::string());
    out.attributor = row.value("attributor", std::string());
    for (const auto& item : row.at("evidences")) {
        out.evidences.push_back(
            ScoredEvidence{item.value("score", 0.0), item.at("index").get<int>()});
        if (item.contains("match_kind")) {
            MatchKind kind = MatchKind::exact;
            std::string name = item["match_kind"].get<std::string>();
            if (name == "normalized") kind = MatchKind::normalized;
            else if (name == "fuzzy") kind = MatchKind::fuzzy;
            out.resolution.push_back(
                ResolvedEvidence{item.at("index").get<int>(), kind, item.value("similarity", 1.0)});
        }
    }
    if (row.contains("failures")) {
        for (const auto& f : row.at("failures")) out.failures.push_back(f.get<std::string>());
    }
    return out;
}

json RunManifest::to_json() const {
    return json{{"complete", complete},
                {"config", config_snapshot},
                {"input_hashes", input_hashes},
                {"stage_output_hashes", stage_output_hashes},
                {"started_at", started_at},
                {"finished_at", finished_at},
                {"tool_version", tool_version}};
}

AttributionPipeline::AttributionPipeline(PipelineConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
    auto mode = gateway_mode_from_string(config_.llm_mode);
    GatewayConfig gc;
    gc.endpoint = config_.llm_endpoint;
    gc.model = config_.llm_model;
    gc.api_key_env = config_.api_key_env;
    gc.max_in_flight = config_.llm_max_in_flight;
    gc.max_retries = config_.llm_max_retries;
    gc.cache_dir = config_.cache_dir;
    std::shared_ptr<Transport> transport_for_gateway = transport_;
    if (*mode != GatewayMode::replay && !transport_for_gateway) {
        transport_for_gateway = make_http_transport();
    }
    gateway_ = std::make_unique<Gateway>(gc, *mode, transport_for_gateway);
}

Gateway& AttributionPipeline::gateway() { return *gateway_; }

std::map<std::string, DecompositionResult> AttributionPipeline::run_decompose(
    const std::vector<TaskRecord>& records) {
    auto kind = strategy_from_string(config_.strategy);
    DecompositionStrategy strategy =
        DecompositionStrategy::with_kind(*kind, static_cast<size_t>(config_.cog_examples));
    std::map<std::string, DecompositionResult> results;
    for (const auto& record : records) {
        results.emplace(record.id, decompose(record, strategy, *gateway_, tagger_));
    }
    return results;
}

std::vector<AttributionRow> AttributionPipeline::run_attribute(
    const std::vector<TaskRecord>& records,
    const std::map<std::string, DecompositionResult>& decompositions) {
    std::vector<AttributionRow> rows;
    AttributorPromptConfig prompt_config{config_.candidate_pool_size, config_.max_returned,
                                         config_.fuzzy_threshold, config_.per_unit_calls};
    for (const auto& record : records) {
        auto it = decompositions.find(record.id);
        if (it == decompositions.end()) {
            throw DataError("no decomposition for record " + record.id);
        }
        const DecompositionResult& decomposition = it->second;

        std::vector<UnitKey> keys;
        if (record.granularity == Granularity::per_sentence) {
            for (const auto& part : record.answer_parts) keys.push_back(UnitKey::part(part.index));
        } else {
            keys.push_back(UnitKey::whole_answer());
        }

        if (config_.attributor == "llm") {
            Bm25Index pool_index = build_index(record.evidence, config_.bm25_k1, config_.bm25_b);
            for (const auto& key : keys) {
                KeyAttribution attribution = attribute_unit_key(record, key, decomposition,
                                                                *gateway_, prompt_config, pool_index);
                AttributionRow row;
                row.record_id = record.id;
                row.unit_key = key;
                row.strategy = std::string(to_string(decomposition.strategy));
                row.attributor = "llm";
                row.evidences = attribution.set.evidences;
                row.resolution = attribution.resolved;
                row.failures = attribution.failures;
                rows.push_back(std::move(row));
            }
            continue;
        }

        Scorer scorer = [&] {
            if (config_.attributor == "bm25") {
                return Scorer::bm25(build_index(record.evidence, config_.bm25_k1, config_.bm25_b));
            }
            auto transport = transport_ ? transport_ : make_http_transport();
            if (config_.attributor == "embedding") {
                return Scorer::embedding_service(config_.retriever_endpoint, transport,
                                                 config_.embedding_cosine);
            }
            return Scorer::cross_encoder_service(config_.retriever_endpoint, transport);
        }();

        for (const auto& key : keys) {
            std::vector<InformationUnit> units = units_for_key(decomposition, key);
            std::vector<std::vector<ScoredEvidence>> per_unit;
            per_unit.reserve(units.size());
            for (const auto& unit : units) {
                per_unit.push_back(scorer.score(unit.text, record.evidence));
            }
            AttributionRow row;
            row.record_id = record.id;
            row.unit_key = key;
            row.strategy = std::string(to_string(decomposition.strategy));
            row.attributor = config_.attributor;
            row.evidences = greedy_merge(units, per_unit, key).evidences;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

MetricsReport AttributionPipeline::run_evaluate(
    const std::vector<TaskRecord>& records, const std::vector<AttributionRow>& rows,
    const std::map<std::string, DecompositionResult>& decompositions, bool llm_mode) const {
    MetricsReport report;
    report.attributor = config_.attributor;
    report.strategy = config_.strategy;

    std::map<std::string, const TaskRecord*> by_id;
    for (const auto& record : records) by_id[record.id] = &record;

    std::vector<std::string> unknown;
    std::map<std::string, std::map<UnitKey, std::vector<int>>> ranked_preds;
    for (const auto& row : rows) {
        if (by_id.find(row.record_id) == by_id.end()) {
            unknown.push_back(row.record_id);
            continue;
        }
        auto& ranked = ranked_preds[row.record_id][row.unit_key];
        for (const auto& se : row.evidences) ranked.push_back(se.evidence_index);
        if (!row.strategy.empty()) report.strategy = row.strategy;
        if (!row.attributor.empty()) report.attributor = row.attributor;
    }
    if (!unknown.empty()) {
        std::sort(unknown.begin(), unknown.end());
        unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
        throw DataError("attributions reference unknown record ids: " + join(unknown, ", "));
    }

    // One evaluation unit per gold entry.
    std::vector<std::pair<std::vector<int>, std::set<int>>> units;
    for (const auto& record : records) {
        for (const auto& entry : record.gold) {
            std::vector<int> ranked;
            auto rec_it = ranked_preds.find(record.id);
            if (rec_it != ranked_preds.end()) {
                auto key_it = rec_it->second.find(entry.unit_key);
                if (key_it != rec_it->second.end()) ranked = key_it->second;
            }
            units.emplace_back(std::move(ranked), entry.evidence_indices);
        }
    }
    report.n_units_evaluated = static_cast<int>(units.size());
    if (units.empty()) {
        report.empty = true;
        return report;
    }
    for (const auto& [ranked, gold] : units) {
        if (ranked.empty()) ++report.n_pred_empty;
        if (gold.empty()) ++report.n_gold_empty;
    }

    if (llm_mode) {
        std::vector<std::pair<std::set<int>, std::set<int>>> pooled;
        pooled.reserve(units.size());
        for (const auto& [ranked, gold] : units) {
            pooled.emplace_back(top_k_cut(ranked, 0), gold);
        }
        report.pooled = aggregate(pooled, config_.micro_average);
    } else {
        for (int k : config_.k_values) {
            std::vector<std::pair<std::set<int>, std::set<int>>> cut;
            cut.reserve(units.size());
            for (const auto& [ranked, gold] : units) {
                cut.emplace_back(top_k_cut(ranked, k), gold);
            }
            report.per_k[k] = aggregate(cut, config_.micro_average);
        }
    }

    // Ablation counters over this run's strategy.
    std::map<std::string, std::map<UnitKey, std::set<int>>> full_preds;
    for (const auto& [record_id, keys] : ranked_preds) {
        for (const auto& [key, ranked] : keys) {
            full_preds[record_id][key] = top_k_cut(ranked, 0);
        }
    }
    AblationCounters counters = ablation_counters(records, decompositions, full_preds);
    report.avg_units_per_sentence[report.strategy] = counters.mean_units_per_sentence;
    report.unattributable_sentences_attributed[report.strategy] = counters.gold_empty_attributed;
    report.classifier_simple_count = counters.classifier_simple_count;
    return report;
}

void save_decompositions(const std::map<std::string, DecompositionResult>& decompositions,
                         const std::filesystem::path& path) {
    std::string out;
    for (const auto& [record_id, result] : decompositions) {
        out += decomposition_to_json(record_id, result).dump();
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

std::map<std::string, DecompositionResult> load_decompositions(const std::filesystem::path& path) {
    std::map<std::string, DecompositionResult> out;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open decompositions file: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (row.is_discarded()) throw DataError("invalid JSON line in " + path.string());
        std::string record_id;
        DecompositionResult result = decomposition_from_json(row, &record_id);
        out.emplace(std::move(record_id), std::move(result));
    }
    return out;
}

void save_attributions(const std::vector<AttributionRow>& rows,
                       const std::filesystem::path& path) {
    std::string out;
    for (const auto& row : rows) {
        out += row.to_json().dump();
        out += '\n';
    }
    write_text_file_atomic(path, out);
}

std::vector<AttributionRow> load_attributions(const std::filesystem::path& path) {
    std::vector<AttributionRow> rows;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open attributions file: " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json row = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (row.is_discarded()) throw DataError("invalid JSON line in " + path.string());
        rows.push_back(AttributionRow::from_json(row));
    }
    return rows;
}

RunManifest run_pipeline(const PipelineConfig& config, std::shared_ptr<Transport> transport) {
    config.validate();
    if (config.records_path.empty()) {
        throw ConfigError("data.records must point at a TaskRecord JSONL file");
    }
    namespace fs = std::filesystem;
    fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);

    RunManifest manifest;
    manifest.config_snapshot = config.to_json();
    manifest.started_at = iso_utc_now();
    manifest.input_hashes["records"] = sha256_hex(read_text_file(config.records_path));

    auto record_hash = [&](const fs::path& path) {
        manifest.stage_output_hashes[path.filename().string()] =
            sha256_hex(read_text_file(path));
    };
    auto finalize = [&](bool complete) {
        manifest.complete = complete;
        manifest.finished_at = iso_utc_now();
        write_text_file_atomic(out_dir / "manifest.json", manifest.to_json().dump(2) + "\n");
    };

    try {
        LoadResult loaded = load_records_jsonl(config.records_path);
        if (loaded.stats.dropped_invalid > 0) {
            throw DataError("records file has " + std::to_string(loaded.stats.dropped_invalid) +
                            " invalid lines: " + join(loaded.stats.drop_reasons, "; "));
        }

        AttributionPipeline pipeline(config, transport);

        auto decompositions = pipeline.run_decompose(loaded.records);
        save_decompositions(decompositions, out_dir / "decompositions.jsonl");
        record_hash(out_dir / "decompositions.jsonl");

        auto rows = pipeline.run_attribute(loaded.records, decompositions);
        save_attributions(rows, out_dir / "attributions.jsonl");
        record_hash(out_dir / "attributions.jsonl");

        MetricsReport report = pipeline.run_evaluate(loaded.records, rows, decompositions,
                                                     config.attributor == "llm");
        write_text_file_atomic(out_dir / "metrics.json",
                               report_to_json(report).dump(2) + "\n");
        record_hash(out_dir / "metrics.json");
    } catch (...) {
        finalize(false);
        throw;
    }
    finalize(true);
    return manifest;
}

}  // namespace attrkit
