#include "attrkit/evaluation.hpp"

#include "attrkit/util.hpp"

#include <algorithm>
#include <cstdio>

namespace attrkit {

using nlohmann::json;

PrValue unit_pr(const std::set<int>& pred, const std::set<int>& gold) {
    PrValue value;
    std::vector<int> intersection;
    std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(),
                          std::back_inserter(intersection));
    if (!pred.empty()) {
        value.precision = static_cast<double>(intersection.size()) / static_cast<double>(pred.size());
    }
    if (!gold.empty()) {
        value.recall = static_cast<double>(intersection.size()) / static_cast<double>(gold.size());
    }
    return value;
}

MetricTriple aggregate(const std::vector<std::pair<std::set<int>, std::set<int>>>& units,
                       bool micro) {
    MetricTriple triple;
    if (micro) {
        long long hit_p = 0, total_pred = 0, hit_r = 0, total_gold = 0;
        for (const auto& [pred, gold] : units) {
            std::vector<int> intersection;
            std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(),
                                  std::back_inserter(intersection));
            if (!pred.empty()) {
                ++triple.n_defined_precision;
                hit_p += static_cast<long long>(intersection.size());
                total_pred += static_cast<long long>(pred.size());
            }
            if (!gold.empty()) {
                ++triple.n_defined_recall;
                hit_r += static_cast<long long>(intersection.size());
                total_gold += static_cast<long long>(gold.size());
            }
        }
        if (total_pred > 0) triple.precision = static_cast<double>(hit_p) / total_pred;
        if (total_gold > 0) triple.recall = static_cast<double>(hit_r) / total_gold;
    } else {
        double sum_p = 0.0, sum_r = 0.0;
        for (const auto& [pred, gold] : units) {
            PrValue pr = unit_pr(pred, gold);
            if (pr.precision) {
                sum_p += *pr.precision;
                ++triple.n_defined_precision;
            }
            if (pr.recall) {
                sum_r += *pr.recall;
                ++triple.n_defined_recall;
            }
        }
        if (triple.n_defined_precision > 0) triple.precision = sum_p / triple.n_defined_precision;
        if (triple.n_defined_recall > 0) triple.recall = sum_r / triple.n_defined_recall;
    }
    if (triple.precision && triple.recall) {
        double p = *triple.precision;
        double r = *triple.recall;
        triple.f1 = (p + r == 0.0) ? 0.0 : 2.0 * p * r / (p + r);
    }
    return triple;
}

std::set<int> top_k_cut(const std::vector<int>& ranked_pred, int k) {
    std::set<int> cut;
    size_t limit = k <= 0 ? ranked_pred.size() : std::min<size_t>(ranked_pred.size(), static_cast<size_t>(k));
    for (size_t i = 0; i < limit; ++i) cut.insert(ranked_pred[i]);
    return cut;
}

AblationCounters ablation_counters(
    const std::vector<TaskRecord>& records,
    const std::map<std::string, DecompositionResult>& decompositions,
    const std::map<std::string, std::map<UnitKey, std::set<int>>>& predictions) {
    AblationCounters counters;
    size_t total_units = 0;
    for (const auto& record : records) {
        auto decomp_it = decompositions.find(record.id);
        if (decomp_it != decompositions.end()) {
            counters.classifier_simple_count +=
                static_cast<int>(decomp_it->second.bypassed_parts.size());
            for (const auto& [index, units] : decomp_it->second.per_sentence_units) {
                total_units += units.size();
                ++counters.n_sentences;
            }
        }
        if (record.granularity != Granularity::per_sentence) continue;
        auto pred_it = predictions.find(record.id);
        for (const auto& entry : record.gold) {
            if (!entry.evidence_indices.empty()) continue;
            ++counters.gold_empty_sentences;
            if (pred_it == predictions.end()) continue;
            auto key_it = pred_it->second.find(entry.unit_key);
            if (key_it != pred_it->second.end() && !key_it->second.empty()) {
                ++counters.gold_empty_attributed;
            }
        }
    }
    if (counters.n_sentences > 0) {
        counters.mean_units_per_sentence =
            static_cast<double>(total_units) / counters.n_sentences;
    }
    return counters;
}

namespace {

json rounded(std::optional<double> value) {
    if (!value) return nullptr;
    return round_half_even(*value, 4);
}

json triple_to_json(const MetricTriple& t) {
    return json{{"precision", rounded(t.precision)},
                {"recall", rounded(t.recall)},
                {"f1", rounded(t.f1)},
                {"n_defined_precision", t.n_defined_precision},
                {"n_defined_recall", t.n_defined_recall}};
}

MetricTriple triple_from_json(const json& j) {
    MetricTriple t;
    if (j.contains("precision") && !j["precision"].is_null()) t.precision = j["precision"].get<double>();
    if (j.contains("recall") && !j["recall"].is_null()) t.recall = j["recall"].get<double>();
    if (j.contains("f1") && !j["f1"].is_null()) t.f1 = j["f1"].get<double>();
    t.n_defined_precision = j.value("n_defined_precision", 0);
    t.n_defined_recall = j.value("n_defined_recall", 0);
    return t;
}

std::string format_metric(std::optional<double> value) {
    if (!value) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", round_half_even(*value, 4));
    return buf;
}

}  // namespace

std::optional<ReportFormat> report_format_from_string(std::string_view s) {
    if (s == "json") return ReportFormat::json;
    if (s == "table") return ReportFormat::table;
    if (s == "plotdata") return ReportFormat::plotdata;
    return std::nullopt;
}

json report_to_json(const MetricsReport& report) {
    json per_k = json::object();
    for (const auto& [k, triple] : report.per_k) {
        per_k[std::to_string(k)] = triple_to_json(triple);
    }
    json avg_units = json::object();
    for (const auto& [strategy, value] : report.avg_units_per_sentence) {
        avg_units[strategy] = round_half_even(value, 4);
    }
    return json{{"strategy", report.strategy},
                {"attributor", report.attributor},
                {"per_k", std::move(per_k)},
                {"pooled", report.pooled ? triple_to_json(*report.pooled) : json(nullptr)},
                {"n_units_evaluated", report.n_units_evaluated},
                {"n_pred_empty", report.n_pred_empty},
                {"n_gold_empty", report.n_gold_empty},
                {"ablation",
                 json{{"avg_units_per_sentence", std::move(avg_units)},
                      {"unattributable_sentences_attributed", report.unattributable_sentences_attributed},
                      {"classifier_simple_count", report.classifier_simple_count}}},
                {"empty", report.empty}};
}

MetricsReport report_from_json(const json& j) {
    MetricsReport report;
    report.strategy = j.value("strategy", std::string());
    report.attributor = j.value("attributor", std::string());
    if (j.contains("per_k")) {
        for (const auto& [key, triple] : j["per_k"].items()) {
            report.per_k[std::stoi(key)] = triple_from_json(triple);
        }
    }
    if (j.contains("pooled") && !j["pooled"].is_null()) {
        report.pooled = triple_from_json(j["pooled"]);
    }
    report.n_units_evaluated = j.value("n_units_evaluated", 0);
    report.n_pred_empty = j.value("n_pred_empty", 0);
    report.n_gold_empty = j.value("n_gold_empty", 0);
    if (j.contains("ablation")) {
        const json& ab = j["ablation"];
        for (const auto& [k, v] : ab.value("avg_units_per_sentence", json::object()).items()) {
            report.avg_units_per_sentence[k] = v.get<double>();
        }
        for (const auto& [k, v] :
             ab.value("unattributable_sentences_attributed", json::object()).items()) {
            report.unattributable_sentences_attributed[k] = v.get<int>();
        }
        report.classifier_simple_count = ab.value("classifier_simple_count", 0);
    }
    report.empty = j.value("empty", false);
    return report;
}

std::string emit_report(const std::vector<MetricsReport>& reports, ReportFormat format) {
    if (format == ReportFormat::json) {
        if (reports.size() == 1) {
            return report_to_json(reports.front()).dump(2) + "\n";
        }
        json all = json::array();
        for (const auto& r : reports) all.push_back(report_to_json(r));
        return all.dump(2) + "\n";
    }
    if (format == ReportFormat::table) {
        std::string out =
            "strategy      attributor     k     precision recall    f1\n"
            "------------------------------------------------------------\n";
        char line[160];
        for (const auto& report : reports) {
            for (const auto& [k, triple] : report.per_k) {
                std::snprintf(line, sizeof(line), "%-13s %-14s %-5d %-9s %-9s %-9s\n",
                              report.strategy.c_str(), report.attributor.c_str(), k,
                              format_metric(triple.precision).c_str(),
                              format_metric(triple.recall).c_str(),
                              format_metric(triple.f1).c_str());
                out += line;
            }
            if (report.pooled) {
                std::snprintf(line, sizeof(line), "%-13s %-14s %-5s %-9s %-9s %-9s\n",
                              report.strategy.c_str(), report.attributor.c_str(), "all",
                              format_metric(report.pooled->precision).c_str(),
                              format_metric(report.pooled->recall).c_str(),
                              format_metric(report.pooled->f1).c_str());
                out += line;
            }
        }
        return out;
    }
    // plotdata: mean decompositions per sentence, one row per strategy
    std::map<std::string, double> rows;
    for (const auto& report : reports) {
        for (const auto& [strategy, value] : report.avg_units_per_sentence) {
            rows[strategy] = value;
        }
    }
    std::string out = "strategy\tmean_units_per_sentence\n";
    char line[128];
    for (const auto& [strategy, value] : rows) {
        std::snprintf(line, sizeof(line), "%s\t%.4f\n", strategy.c_str(),
                      round_half_even(value, 4));
        out += line;
    }
    return out;
}

}  // namespace attrkit
