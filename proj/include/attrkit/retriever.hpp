#pragma once

#include "attrkit/net.hpp"
#include "attrkit/types.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace attrkit {

struct Bm25Index {
    double k1 = 1.2;
    double b = 0.75;
    double avg_length = 0.0;
    std::vector<std::unordered_map<std::string, int>> term_counts;  // per evidence
    std::vector<int> lengths;                                        // token counts
    std::unordered_map<std::string, int> document_frequency;

    size_t size() const { return lengths.size(); }
    int df(const std::string& term) const {
        auto it = document_frequency.find(term);
        return it == document_frequency.end() ? 0 : it->second;
    }
};

/// Tokenization: casefold, split on non-alphanumeric code points, drop
/// empties. Parameters default to the common Okapi settings.
Bm25Index build_index(const std::vector<EvidenceSentence>& evidence, double k1 = 1.2,
                      double b = 0.75);

/// Okapi BM25 with idf = ln((N - df + 0.5)/(df + 0.5) + 1), which keeps
/// scores non-negative. Repeated query terms contribute once per occurrence.
/// Returns one score per evidence, in document order.
std::vector<ScoredEvidence> bm25_scores(const Bm25Index& index, std::string_view query);

enum class ScorerKind { bm25, embedding_service, cross_encoder_service };

std::string_view to_string(ScorerKind kind);
std::optional<ScorerKind> scorer_kind_from_string(std::string_view s);

struct ScorerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A scorer maps (query, all evidences) -> one score per evidence.
/// Service-backed scorers speak the wire contracts documented in the README:
///   embedding:     POST {"texts":[...]}            -> {"vectors":[[...],...]}
///   cross-encoder: POST {"query":s,"candidates":[...]} -> {"scores":[...]}
class Scorer {
public:
    static Scorer bm25(Bm25Index index);
    static Scorer embedding_service(std::string endpoint, std::shared_ptr<Transport> transport,
                                    bool cosine = false);
    static Scorer cross_encoder_service(std::string endpoint, std::shared_ptr<Transport> transport);

    ScorerKind kind() const { return kind_; }

    std::vector<ScoredEvidence> score(std::string_view query,
                                      const std::vector<EvidenceSentence>& evidence) const;

private:
    Scorer() = default;
    ScorerKind kind_ = ScorerKind::bm25;
    Bm25Index index_;
    std::string endpoint_;
    std::shared_ptr<Transport> transport_;
    bool cosine_ = false;
};

/// Per-unit best-unused-evidence selection followed by a score-descending
/// sort (ties resolved toward the lower evidence index). Each unit
/// contributes at most one evidence; a unit whose candidates are exhausted
/// contributes nothing.
AttributionSet greedy_merge(const std::vector<InformationUnit>& units,
                            const std::vector<std::vector<ScoredEvidence>>& per_unit_scores,
                            UnitKey key);

/// Prefix of the ranked list, min(k, size). k must be >= 1.
AttributionSet top_k(const AttributionSet& set, int k);

}  // namespace attrkit
