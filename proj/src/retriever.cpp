#include "attrkit/retriever.hpp"

#include "attrkit/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace attrkit {

using nlohmann::json;

std::string_view to_string(ScorerKind kind) {
    switch (kind) {
        case ScorerKind::bm25: return "bm25";
        case ScorerKind::embedding_service: return "embedding";
        case ScorerKind::cross_encoder_service: return "cross_encoder";
    }
    return "bm25";
}

std::optional<ScorerKind> scorer_kind_from_string(std::string_view s) {
    if (s == "bm25") return ScorerKind::bm25;
    if (s == "embedding") return ScorerKind::embedding_service;
    if (s == "cross_encoder") return ScorerKind::cross_encoder_service;
    return std::nullopt;
}

Bm25Index build_index(const std::vector<EvidenceSentence>& evidence, double k1, double b) {
    if (evidence.empty()) {
        throw std::invalid_argument("cannot build an index over an empty evidence list");
    }
    Bm25Index index;
    index.k1 = k1;
    index.b = b;
    index.term_counts.reserve(evidence.size());
    index.lengths.reserve(evidence.size());
    long long total = 0;
    for (const auto& ev : evidence) {
        std::unordered_map<std::string, int> counts;
        std::vector<std::string> tokens = tokenize(ev.text);
        for (auto& tok : tokens) ++counts[tok];
        for (const auto& [term, count] : counts) ++index.document_frequency[term];
        index.lengths.push_back(static_cast<int>(tokens.size()));
        total += static_cast<long long>(tokens.size());
        index.term_counts.push_back(std::move(counts));
    }
    index.avg_length = static_cast<double>(total) / static_cast<double>(evidence.size());
    return index;
}

std::vector<ScoredEvidence> bm25_scores(const Bm25Index& index, std::string_view query) {
    const double n = static_cast<double>(index.size());
    std::vector<ScoredEvidence> scores;
    scores.reserve(index.size());
    for (size_t i = 0; i < index.size(); ++i) {
        scores.push_back(ScoredEvidence{0.0, static_cast<int>(i)});
    }
    for (const std::string& term : tokenize(query)) {
        int df = index.df(term);
        if (df == 0) continue;
        double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        for (size_t i = 0; i < index.size(); ++i) {
            auto it = index.term_counts[i].find(term);
            if (it == index.term_counts[i].end()) continue;
            double tf = it->second;
            double norm = index.k1 * (1.0 - index.b + index.b * index.lengths[i] / index.avg_length);
            scores[i].score += idf * tf * (index.k1 + 1.0) / (tf + norm);
        }
    }
    return scores;
}

Scorer Scorer::bm25(Bm25Index index) {
    Scorer s;
    s.kind_ = ScorerKind::bm25;
    s.index_ = std::move(index);
    return s;
}

Scorer Scorer::embedding_service(std::string endpoint, std::shared_ptr<Transport> transport,
                                 bool cosine) {
    Scorer s;
    s.kind_ = ScorerKind::embedding_service;
    s.endpoint_ = std::move(endpoint);
    s.transport_ = std::move(transport);
    s.cosine_ = cosine;
    return s;
}

Scorer Scorer::cross_encoder_service(std::string endpoint, std::shared_ptr<Transport> transport) {
    Scorer s;
    s.kind_ = ScorerKind::cross_encoder_service;
    s.endpoint_ = std::move(endpoint);
    s.transport_ = std::move(transport);
    return s;
}

namespace {

json post_service(Transport& transport, const std::string& endpoint, const json& body) {
    HttpResult res;
    try {
        res = transport.post_json(endpoint, body.dump(), {});
    } catch (const TransportError& e) {
        throw ScorerError(std::string("scorer service unreachable: ") + e.what());
    }
    if (res.status < 200 || res.status >= 300) {
        throw ScorerError("scorer service returned HTTP " + std::to_string(res.status) + ": " +
                          res.body);
    }
    json parsed = json::parse(res.body, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) {
        throw ScorerError("scorer service returned non-JSON body");
    }
    return parsed;
}

}  // namespace

std::vector<ScoredEvidence> Scorer::score(std::string_view query,
                                          const std::vector<EvidenceSentence>& evidence) const {
    if (evidence.empty()) return {};
    std::vector<ScoredEvidence> out;
    out.reserve(evidence.size());

    if (kind_ == ScorerKind::bm25) {
        std::vector<ScoredEvidence> scores = bm25_scores(index_, query);
        // The index was built over the full document; map onto the supplied
        // evidence subset by stored index.
        for (const auto& ev : evidence) {
            if (ev.index < 0 || ev.index >= static_cast<int>(scores.size())) {
                throw ScorerError("evidence index " + std::to_string(ev.index) +
                                  " outside the indexed document");
            }
            out.push_back(scores[ev.index]);
        }
        return out;
    }
    if (!transport_) {
        throw ScorerError("service scorer has no transport configured");
    }
    if (kind_ == ScorerKind::embedding_service) {
        json texts = json::array();
        texts.push_back(std::string(query));
        for (const auto& ev : evidence) texts.push_back(ev.text);
        json response = post_service(*transport_, endpoint_, json{{"texts", std::move(texts)}});
        if (!response.contains("vectors") || !response["vectors"].is_array() ||
            response["vectors"].size() != evidence.size() + 1) {
            throw ScorerError("embedding service returned " +
                              std::to_string(response.value("vectors", json::array()).size()) +
                              " vectors for " + std::to_string(evidence.size() + 1) + " texts");
        }
        std::vector<double> q = response["vectors"][0].get<std::vector<double>>();
        double qn = std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
        for (size_t i = 0; i < evidence.size(); ++i) {
            std::vector<double> v = response["vectors"][i + 1].get<std::vector<double>>();
            if (v.size() != q.size()) {
                throw ScorerError("embedding dimensions differ across texts");
            }
            double dot = std::inner_product(q.begin(), q.end(), v.begin(), 0.0);
            if (cosine_) {
                double vn = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
                dot = (qn == 0.0 || vn == 0.0) ? 0.0 : dot / (qn * vn);
            }
            out.push_back(ScoredEvidence{dot, evidence[i].index});
        }
        return out;
    }
    // cross-encoder
    json candidates = json::array();
    for (const auto& ev : evidence) candidates.push_back(ev.text);
    json response = post_service(*transport_, endpoint_,
                                 json{{"query", std::string(query)}, {"candidates", std::move(candidates)}});
    if (!response.contains("scores") || !response["scores"].is_array() ||
        response["scores"].size() != evidence.size()) {
        throw ScorerError("cross-encoder returned " +
                          std::to_string(response.value("scores", json::array()).size()) +
                          " scores for " + std::to_string(evidence.size()) + " candidates");
    }
    for (size_t i = 0; i < evidence.size(); ++i) {
        out.push_back(ScoredEvidence{response["scores"][i].get<double>(), evidence[i].index});
    }
    return out;
}

AttributionSet greedy_merge(const std::vector<InformationUnit>& units,
                            const std::vector<std::vector<ScoredEvidence>>& per_unit_scores,
                            UnitKey key) {
    if (units.size() != per_unit_scores.size()) {
        throw std::invalid_argument("greedy_merge: one score list per unit required");
    }
    AttributionSet result;
    result.unit_key = key;
    std::set<int> selected;
    for (size_t i = 0; i < units.size(); ++i) {
        double max_score = -std::numeric_limits<double>::infinity();
        int best_evidence = -1;
        for (const auto& se : per_unit_scores[i]) {
            if (se.score > max_score && selected.count(se.evidence_index) == 0) {
                max_score = se.score;
                best_evidence = se.evidence_index;
            }
        }
        if (best_evidence >= 0) {
            result.evidences.push_back(ScoredEvidence{max_score, best_evidence});
            selected.insert(best_evidence);
        }
    }
    sort_by_rank(result.evidences);
    return result;
}

AttributionSet top_k(const AttributionSet& set, int k) {
    if (k < 1) {
        throw std::invalid_argument("top_k requires k >= 1");
    }
    AttributionSet cut;
    cut.unit_key = set.unit_key;
    size_t n = std::min<size_t>(static_cast<size_t>(k), set.evidences.size());
    cut.evidences.assign(set.evidences.begin(), set.evidences.begin() + n);
    return cut;
}

}  // namespace attrkit
