#pragma once

#include "attrkit/decomposer.hpp"
#include "attrkit/types.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace attrkit {

struct PrValue {
    std::optional<double> precision;  // undefined when the prediction set is empty
    std::optional<double> recall;     // undefined when the gold set is empty
};

PrValue unit_pr(const std::set<int>& pred, const std::set<int>& gold);

struct MetricTriple {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;  // harmonic mean of the aggregates; 0 when P+R=0
    int n_defined_precision = 0;
    int n_defined_recall = 0;
};

/// Macro average by default: P is the mean of defined unit precisions, R the
/// mean of defined unit recalls, F1 the harmonic mean of those aggregates.
/// micro pools intersection counts instead.
MetricTriple aggregate(const std::vector<std::pair<std::set<int>, std::set<int>>>& units,
                       bool micro = false);

/// Keeps the top-k ranked predictions as a set (k <= 0 means no cut).
std::set<int> top_k_cut(const std::vector<int>& ranked_pred, int k);

struct AblationCounters {
    int gold_empty_sentences = 0;    // sentences annotated as needing no attribution
    int gold_empty_attributed = 0;   // ...that still received >= 1 predicted evidence
    int classifier_simple_count = 0; // sentences the classifier bypassed
    double mean_units_per_sentence = 0.0;
    int n_sentences = 0;
};

/// Per-sentence ablation plumbing over one strategy's decompositions and
/// predictions, keyed by record id.
AblationCounters ablation_counters(
    const std::vector<TaskRecord>& records,
    const std::map<std::string, DecompositionResult>& decompositions,
    const std::map<std::string, std::map<UnitKey, std::set<int>>>& predictions);

struct MetricsReport {
    std::string strategy;
    std::string attributor;
    std::map<int, MetricTriple> per_k;       // retrieval mode
    std::optional<MetricTriple> pooled;      // LLM mode (no top-k cuts)
    int n_units_evaluated = 0;
    int n_pred_empty = 0;  // units excluded from the P mean
    int n_gold_empty = 0;  // units excluded from the R mean
    std::map<std::string, double> avg_units_per_sentence;            // per strategy
    std::map<std::string, int> unattributable_sentences_attributed;  // per strategy
    int classifier_simple_count = 0;
    bool empty = false;  // no units at all; distinct from all-zero metrics
};

enum class ReportFormat { json, table, plotdata };

std::optional<ReportFormat> report_format_from_string(std::string_view s);

/// Canonical JSON: sorted keys, floats rounded half-even to 4 decimals.
/// Byte-stable for golden-file tests.
nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// json: canonical single report. table: one row per (strategy, attributor,
/// k). plotdata: one (strategy, mean-units-per-sentence) row per strategy.
std::string emit_report(const std::vector<MetricsReport>& reports, ReportFormat format);

}  // namespace attrkit
