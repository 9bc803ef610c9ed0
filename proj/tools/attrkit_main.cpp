#include "attrkit/datasets.hpp"
#include "attrkit/pipeline.hpp"
#include "attrkit/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using attrkit::ConfigError;
using attrkit::DataError;
using attrkit::GatewayError;
using attrkit::PipelineConfig;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitGateway = 4;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--set", opts.overrides, "Dotted config override, e.g. llm.mode=replay");
}

PipelineConfig effective_config(const CommonOpts& opts,
                                const std::vector<std::string>& extra_overrides = {}) {
    json tree = json::object();
    if (!opts.config_path.empty()) {
        tree = attrkit::load_config_tree(opts.config_path);
    }
    for (const auto& assignment : opts.overrides) {
        attrkit::apply_override(tree, assignment);
    }
    for (const auto& assignment : extra_overrides) {
        attrkit::apply_override(tree, assignment);
    }
    PipelineConfig config = PipelineConfig::from_json(tree);
    config.validate();
    return config;
}

std::vector<int> parse_k_list(const std::string& spec) {
    std::vector<int> ks;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = attrkit::trim(item);
        if (item.empty()) continue;
        try {
            ks.push_back(std::stoi(item));
        } catch (...) {
            throw ConfigError("bad k value '" + item + "'");
        }
    }
    if (ks.empty()) throw ConfigError("k list is empty");
    return ks;
}

void write_or_print(const std::string& content, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << content;
    } else {
        attrkit::write_text_file_atomic(out_path, content);
    }
}

int run_ingest(const std::string& format, const std::string& in_path, const std::string& out_path,
               bool no_exclusions, const std::string& stats_path) {
    attrkit::LoadResult loaded;
    if (format == "verifiability") {
        loaded = attrkit::load_verifiability(in_path);
    } else if (format == "qasper") {
        loaded = attrkit::load_qasper(in_path);
    } else if (format == "jsonl") {
        loaded = attrkit::load_records_jsonl(in_path);
    } else {
        throw ConfigError("unknown ingest format '" + format + "'");
    }

    json stats = json::object();
    stats["load"] = loaded.stats.to_json();
    std::vector<attrkit::TaskRecord> records = std::move(loaded.records);
    if (!no_exclusions) {
        auto [kept, exclusion_stats] = attrkit::apply_exclusions(records);
        records = std::move(kept);
        stats["exclusions"] = exclusion_stats.to_json();
    }
    attrkit::save_records_jsonl(records, out_path);
    if (!stats_path.empty()) {
        attrkit::write_text_file_atomic(stats_path, stats.dump(2) + "\n");
    }
    std::cerr << "ingested " << records.size() << " records ("
              << loaded.stats.dropped_invalid << " dropped invalid)\n";
    return kExitOk;
}

int run_decompose(const CommonOpts& common, const std::string& records_path,
                  const std::string& strategy, const std::string& out_path) {
    std::vector<std::string> extra;
    if (!strategy.empty()) extra.push_back("decomposer.strategy=" + strategy);
    PipelineConfig config = effective_config(common, extra);

    attrkit::LoadResult loaded = attrkit::load_records_jsonl(records_path);
    if (loaded.stats.dropped_invalid > 0) {
        throw DataError("records file has invalid lines: " +
                        attrkit::join(loaded.stats.drop_reasons, "; "));
    }
    attrkit::AttributionPipeline pipeline(config);
    auto decompositions = pipeline.run_decompose(loaded.records);
    attrkit::save_decompositions(decompositions, out_path);
    std::cerr << "decomposed " << decompositions.size() << " records with strategy "
              << config.strategy << "\n";
    return kExitOk;
}

int run_attribute(const CommonOpts& common, const std::string& records_path,
                  const std::string& decompositions_path, const std::string& attributor,
                  const std::string& out_path) {
    std::vector<std::string> extra;
    if (!attributor.empty()) extra.push_back("attributor.kind=" + attributor);
    PipelineConfig config = effective_config(common, extra);

    attrkit::LoadResult loaded = attrkit::load_records_jsonl(records_path);
    if (loaded.stats.dropped_invalid > 0) {
        throw DataError("records file has invalid lines: " +
                        attrkit::join(loaded.stats.drop_reasons, "; "));
    }
    auto decompositions = attrkit::load_decompositions(decompositions_path);
    attrkit::AttributionPipeline pipeline(config);
    auto rows = pipeline.run_attribute(loaded.records, decompositions);
    attrkit::save_attributions(rows, out_path);
    std::cerr << "attributed " << rows.size() << " unit keys with " << config.attributor << "\n";
    return kExitOk;
}

int run_evaluate(const CommonOpts& common, const std::string& pred_path,
                 const std::string& gold_path, const std::string& mode, const std::string& k_spec,
                 const std::string& decompositions_path, const std::string& out_path) {
    std::vector<std::string> extra;
    if (!k_spec.empty()) {
        json ks = parse_k_list(k_spec);
        extra.push_back("evaluation.k=" + ks.dump());
    }
    PipelineConfig config = effective_config(common, extra);
    if (mode != "retrieval" && mode != "llm") {
        throw ConfigError("evaluate --mode must be retrieval or llm");
    }

    attrkit::LoadResult loaded = attrkit::load_records_jsonl(gold_path);
    if (loaded.stats.dropped_invalid > 0) {
        throw DataError("gold records file has invalid lines: " +
                        attrkit::join(loaded.stats.drop_reasons, "; "));
    }
    auto rows = attrkit::load_attributions(pred_path);
    std::map<std::string, attrkit::DecompositionResult> decompositions;
    if (!decompositions_path.empty()) {
        decompositions = attrkit::load_decompositions(decompositions_path);
    }
    attrkit::AttributionPipeline pipeline(config);
    attrkit::MetricsReport report =
        pipeline.run_evaluate(loaded.records, rows, decompositions, mode == "llm");
    write_or_print(attrkit::report_to_json(report).dump(2) + "\n", out_path);
    return kExitOk;
}

int run_report(const std::vector<std::string>& metrics_paths, const std::string& format_name,
               const std::string& out_path) {
    auto format = attrkit::report_format_from_string(format_name);
    if (!format) {
        throw ConfigError("unknown report format '" + format_name + "'");
    }
    std::vector<attrkit::MetricsReport> reports;
    for (const auto& path : metrics_paths) {
        json parsed = json::parse(attrkit::read_text_file(path), nullptr, false);
        if (parsed.is_discarded()) throw DataError("metrics file is not JSON: " + path);
        if (parsed.is_array()) {
            for (const auto& item : parsed) reports.push_back(attrkit::report_from_json(item));
        } else {
            reports.push_back(attrkit::report_from_json(parsed));
        }
    }
    if (reports.empty()) throw DataError("no metrics reports loaded");
    write_or_print(attrkit::emit_report(reports, *format), out_path);
    return kExitOk;
}

int run_run(const CommonOpts& common) {
    PipelineConfig config = effective_config(common);
    attrkit::RunManifest manifest = attrkit::run_pipeline(config);
    std::cerr << "pipeline complete; outputs under " << config.output_dir << "\n";
    std::cout << manifest.to_json().dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attrkit: post-hoc answer attribution pipeline"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Convert a dataset into TaskRecord JSONL");
    std::string ingest_format, ingest_in, ingest_out, ingest_stats;
    bool ingest_no_exclusions = false;
    ingest->add_option("--format", ingest_format, "verifiability|qasper|jsonl")->required();
    ingest->add_option("--in", ingest_in, "input path")->required();
    ingest->add_option("--out", ingest_out, "output records JSONL")->required();
    ingest->add_flag("--no-exclusions", ingest_no_exclusions,
                     "skip the exact-match exclusion rule");
    ingest->add_option("--stats", ingest_stats, "write ingestion stats JSON here");

    // decompose
    auto* decompose = app.add_subcommand("decompose", "Decompose answers into information units");
    CommonOpts decompose_common;
    add_common(decompose, decompose_common);
    std::string decompose_records, decompose_strategy, decompose_out;
    decompose->add_option("--records", decompose_records, "TaskRecord JSONL")->required();
    decompose->add_option("--strategy", decompose_strategy, "nil|factscore|cog|cog_no_neg");
    decompose->add_option("--out", decompose_out, "output decompositions JSONL")->required();

    // attribute
    auto* attribute = app.add_subcommand("attribute", "Map information units to evidence");
    CommonOpts attribute_common;
    add_common(attribute, attribute_common);
    std::string attribute_records, attribute_decomps, attribute_kind, attribute_out;
    attribute->add_option("--records", attribute_records, "TaskRecord JSONL")->required();
    attribute->add_option("--decompositions", attribute_decomps, "decompositions JSONL")->required();
    attribute->add_option("--attributor", attribute_kind, "bm25|embedding|cross_encoder|llm");
    attribute->add_option("--out", attribute_out, "output attributions JSONL")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Score attributions against gold");
    CommonOpts evaluate_common;
    add_common(evaluate, evaluate_common);
    std::string eval_pred, eval_gold, eval_mode = "retrieval", eval_k, eval_decomps, eval_out;
    evaluate->add_option("--pred", eval_pred, "attributions JSONL")->required();
    evaluate->add_option("--gold", eval_gold, "TaskRecord JSONL")->required();
    evaluate->add_option("--mode", eval_mode, "retrieval|llm");
    evaluate->add_option("--k", eval_k, "comma-separated cut list, e.g. 1,2,4");
    evaluate->add_option("--decompositions", eval_decomps, "decompositions JSONL for ablation");
    evaluate->add_option("--out", eval_out, "metrics JSON output (default stdout)");

    // report
    auto* report = app.add_subcommand("report", "Render metrics reports");
    std::vector<std::string> report_metrics;
    std::string report_format = "table", report_out;
    report->add_option("--metrics", report_metrics, "metrics JSON file(s)")->required();
    report->add_option("--format", report_format, "json|table|plotdata");
    report->add_option("--out", report_out, "output path (default stdout)");

    // run
    auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
    CommonOpts run_common;
    add_common(run, run_common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*ingest) {
            return run_ingest(ingest_format, ingest_in, ingest_out, ingest_no_exclusions,
                              ingest_stats);
        }
        if (*decompose) {
            return run_decompose(decompose_common, decompose_records, decompose_strategy,
                                 decompose_out);
        }
        if (*attribute) {
            return run_attribute(attribute_common, attribute_records, attribute_decomps,
                                 attribute_kind, attribute_out);
        }
        if (*evaluate) {
            return run_evaluate(evaluate_common, eval_pred, eval_gold, eval_mode, eval_k,
                                eval_decomps, eval_out);
        }
        if (*report) {
            return run_report(report_metrics, report_format, report_out);
        }
        if (*run) {
            return run_run(run_common);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const GatewayError& e) {
        std::cerr << "gateway error: " << e.what() << "\n";
        return kExitGateway;
    } catch (const attrkit::ScorerError& e) {
        std::cerr << "scorer error: " << e.what() << "\n";
        return kExitGateway;
    } catch (const attrkit::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return kExitGateway;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
