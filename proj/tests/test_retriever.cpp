#include "attrkit/retriever.hpp"

#include "attrkit/util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <map>
#include <random>

using namespace attrkit;
using nlohmann::json;

namespace {

std::vector<EvidenceSentence> make_evidence(const std::vector<std::string>& texts) {
    std::vector<EvidenceSentence> evidence;
    for (size_t i = 0; i < texts.size(); ++i) evidence.emplace_back(static_cast<int>(i), texts[i]);
    return evidence;
}

// Independent reference: recomputes document frequencies and lengths by
// scanning the corpus per query, no shared state with the index.
double reference_bm25(const std::vector<std::string>& corpus, const std::string& query,
                      size_t doc, double k1, double b) {
    size_t n = corpus.size();
    double total_len = 0;
    for (const auto& text : corpus) total_len += static_cast<double>(tokenize(text).size());
    double avgdl = total_len / static_cast<double>(n);
    std::vector<std::string> doc_tokens = tokenize(corpus[doc]);
    double score = 0.0;
    for (const auto& term : tokenize(query)) {
        size_t df = 0;
        for (const auto& text : corpus) {
            for (const auto& tok : tokenize(text)) {
                if (tok == term) {
                    ++df;
                    break;
                }
            }
        }
        if (df == 0) continue;
        size_t tf = 0;
        for (const auto& tok : doc_tokens) {
            if (tok == term) ++tf;
        }
        if (tf == 0) continue;
        double idf = std::log((static_cast<double>(n) - df + 0.5) / (df + 0.5) + 1.0);
        double denom = tf + k1 * (1.0 - b + b * doc_tokens.size() / avgdl);
        score += idf * (tf * (k1 + 1.0)) / denom;
    }
    return score;
}

// Literal transcription of the merging pseudocode, structured differently
// from the implementation (works on (unit, evidence) score lookups).
std::vector<ScoredEvidence> algorithm1_reference(
    const std::vector<std::vector<ScoredEvidence>>& per_unit_scores) {
    std::vector<ScoredEvidence> merged;
    auto in_l = [&](int evidence) {
        for (const auto& se : merged) {
            if (se.evidence_index == evidence) return true;
        }
        return false;
    };
    for (const auto& scores : per_unit_scores) {
        double max_score = -std::numeric_limits<double>::infinity();
        int best_evidence = -1;
        for (const auto& se : scores) {
            if (se.score > max_score && !in_l(se.evidence_index)) {
                max_score = se.score;
                best_evidence = se.evidence_index;
            }
        }
        if (best_evidence != -1) {
            merged.push_back(ScoredEvidence{max_score, best_evidence});
        }
    }
    std::stable_sort(merged.begin(), merged.end(), [](const ScoredEvidence& a, const ScoredEvidence& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.evidence_index < b.evidence_index;
    });
    return merged;
}

std::vector<InformationUnit> dummy_units(size_t n) {
    std::vector<InformationUnit> units;
    for (size_t i = 0; i < n; ++i) {
        units.emplace_back("u" + std::to_string(i), static_cast<int>(i), UnitOrigin::decomposed);
    }
    return units;
}

struct ServiceTransport : Transport {
    json reply;
    json last_request;
    HttpResult post_json(const std::string&, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>&) override {
        last_request = json::parse(body);
        return HttpResult{200, reply.dump()};
    }
};

}  // namespace

TEST_SUITE("retriever") {

TEST_CASE("index statistics on a hand-counted fixture") {
    // token counts: 4, 2, 3 -> avgdl = 3
    Bm25Index index = build_index(make_evidence({"the cat sat down", "cats sleep",
                                                 "dogs chase cats"}));
    CHECK(index.size() == 3);
    CHECK(index.avg_length == doctest::Approx(3.0));
    CHECK(index.lengths == std::vector<int>{4, 2, 3});
    CHECK(index.df("cats") == 2);
    CHECK(index.df("the") == 1);
    CHECK(index.df("unicorn") == 0);
    CHECK_THROWS_AS(build_index({}), std::invalid_argument);
}

TEST_CASE("duplicated evidences get identical statistics") {
    Bm25Index index = build_index(make_evidence({"same words here", "same words here"}));
    CHECK(index.lengths[0] == index.lengths[1]);
    auto scores = bm25_scores(index, "same words");
    CHECK(scores[0].score == doctest::Approx(scores[1].score));
}

TEST_CASE("query with no corpus overlap scores zero everywhere") {
    Bm25Index index = build_index(make_evidence({"alpha beta", "gamma delta"}));
    for (const auto& se : bm25_scores(index, "zeta eta theta")) {
        CHECK(se.score == 0.0);
    }
}

TEST_CASE("bm25 matches the independent reference formula within 1e-9") {
    std::vector<std::string> corpus = {
        "the quick brown fox jumps over the lazy dog",
        "a quick brown cat sleeps",
        "the dog barks at the mail carrier every day",
        "foxes and dogs rarely share a den",
        "mail arrives in the morning",
        "the lazy cat ignores the quick dog",
    };
    Bm25Index index = build_index(make_evidence(corpus), 1.2, 0.75);
    std::vector<std::string> queries = {"quick fox", "lazy dog morning", "cat",
                                        "the the the", "mail carrier dog", "absent words"};
    for (const auto& query : queries) {
        auto scores = bm25_scores(index, query);
        for (size_t doc = 0; doc < corpus.size(); ++doc) {
            CHECK(scores[doc].score ==
                  doctest::Approx(reference_bm25(corpus, query, doc, 1.2, 0.75)).epsilon(1e-9));
        }
    }
}

TEST_CASE("adding a query-term occurrence does not decrease the score") {
    // Replace a non-query token with the query term, holding length fixed.
    std::mt19937 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> corpus = {"cat dog bird fish", "dog dog mouse tree",
                                           "tree stone river cloud"};
        std::string query = "dog";
        size_t doc = trial % corpus.size();
        auto before_scores = bm25_scores(build_index(make_evidence(corpus)), query);
        std::vector<std::string> tokens = tokenize(corpus[doc]);
        bool replaced = false;
        for (auto& tok : tokens) {
            if (tok != "dog") {
                tok = "dog";
                replaced = true;
                break;
            }
        }
        if (!replaced) continue;
        corpus[doc] = join(tokens, " ");
        auto after_scores = bm25_scores(build_index(make_evidence(corpus)), query);
        CHECK(after_scores[doc].score >= before_scores[doc].score - 1e-12);
    }
}

TEST_CASE("greedy merge: hand-executed two-unit example") {
    // u1 {e0:0.9, e1:0.5}, u2 {e0:0.8, e1:0.7} -> u1 takes e0, u2 takes e1
    std::vector<std::vector<ScoredEvidence>> scores = {
        {{0.9, 0}, {0.5, 1}},
        {{0.8, 0}, {0.7, 1}},
    };
    AttributionSet merged = greedy_merge(dummy_units(2), scores, UnitKey::part(0));
    REQUIRE(merged.evidences.size() == 2);
    CHECK(merged.evidences[0].score == 0.9);
    CHECK(merged.evidences[0].evidence_index == 0);
    CHECK(merged.evidences[1].score == 0.7);
    CHECK(merged.evidences[1].evidence_index == 1);
}

TEST_CASE("greedy merge: single max and empty input") {
    std::vector<std::vector<ScoredEvidence>> scores = {{{0.9, 1}, {0.1, 2}}};
    AttributionSet merged = greedy_merge(dummy_units(1), scores, UnitKey::part(0));
    REQUIRE(merged.evidences.size() == 1);
    CHECK(merged.evidences[0].evidence_index == 1);

    CHECK(greedy_merge({}, {}, UnitKey::part(0)).evidences.empty());
    CHECK_THROWS_AS(greedy_merge(dummy_units(2), scores, UnitKey::part(0)), std::invalid_argument);
}

TEST_CASE("greedy merge: exhausted units contribute nothing") {
    // 3 units over 2 evidences: the third unit finds everything taken.
    std::vector<std::vector<ScoredEvidence>> scores = {
        {{0.9, 0}, {0.1, 1}},
        {{0.8, 0}, {0.7, 1}},
        {{0.6, 0}, {0.5, 1}},
    };
    AttributionSet merged = greedy_merge(dummy_units(3), scores, UnitKey::part(0));
    CHECK(merged.evidences.size() == 2);
}

TEST_CASE("greedy merge equals the pseudocode transcription on random instances") {
    std::mt19937 rng(20240818);
    std::uniform_int_distribution<int> units_dist(0, 6);
    std::uniform_int_distribution<int> evidence_dist(1, 10);
    std::uniform_real_distribution<double> score_dist(-1.0, 1.0);
    std::uniform_int_distribution<int> dup_dist(0, 3);
    for (int trial = 0; trial < 500; ++trial) {
        int n_units = units_dist(rng);
        int n_evidence = evidence_dist(rng);
        std::vector<std::vector<ScoredEvidence>> scores(static_cast<size_t>(n_units));
        for (auto& list : scores) {
            for (int e = 0; e < n_evidence; ++e) {
                double s = score_dist(rng);
                if (dup_dist(rng) == 0) s = 0.25;  // force score ties
                list.push_back(ScoredEvidence{s, e});
            }
        }
        AttributionSet merged = greedy_merge(dummy_units(static_cast<size_t>(n_units)), scores,
                                             UnitKey::part(0));
        std::vector<ScoredEvidence> expected = algorithm1_reference(scores);
        REQUIRE(merged.evidences.size() == expected.size());
        for (size_t i = 0; i < expected.size(); ++i) {
            CHECK(merged.evidences[i].score == expected[i].score);
            CHECK(merged.evidences[i].evidence_index == expected[i].evidence_index);
        }
        // invariants: no duplicates, at most one per unit, descending scores
        std::set<int> seen;
        for (const auto& se : merged.evidences) CHECK(seen.insert(se.evidence_index).second);
        CHECK(merged.evidences.size() <= static_cast<size_t>(n_units));
        for (size_t i = 1; i < merged.evidences.size(); ++i) {
            CHECK(merged.evidences[i - 1].score >= merged.evidences[i].score);
        }
    }
}

TEST_CASE("top_k truncates and preserves the original") {
    AttributionSet set;
    set.unit_key = UnitKey::part(0);
    set.evidences = {{0.9, 0}, {0.7, 1}, {0.5, 2}, {0.3, 3}};
    AttributionSet cut = top_k(set, 2);
    CHECK(cut.evidences.size() == 2);
    CHECK(set.evidences.size() == 4);
    CHECK(top_k(set, 9).evidences.size() == 4);

    AttributionSet single;
    single.evidences = {{0.9, 0}};
    CHECK(top_k(single, 4).evidences.size() == 1);
    CHECK_THROWS_AS(top_k(set, 0), std::invalid_argument);
}

TEST_CASE("ties at the cut resolve deterministically across runs") {
    std::vector<std::vector<ScoredEvidence>> scores = {
        {{0.5, 3}, {0.5, 1}, {0.5, 2}},
        {{0.5, 3}, {0.5, 1}, {0.5, 2}},
        {{0.5, 3}, {0.5, 1}, {0.5, 2}},
    };
    AttributionSet first = greedy_merge(dummy_units(3), scores, UnitKey::part(0));
    for (int run = 0; run < 5; ++run) {
        AttributionSet again = greedy_merge(dummy_units(3), scores, UnitKey::part(0));
        AttributionSet cut = top_k(again, 2);
        REQUIRE(cut.evidences.size() == 2);
        CHECK(cut.evidences[0].evidence_index == first.evidences[0].evidence_index);
        CHECK(cut.evidences[1].evidence_index == first.evidences[1].evidence_index);
    }
    // tie scores sort by evidence index
    CHECK(first.evidences[0].evidence_index == 1);
    CHECK(first.evidences[1].evidence_index == 2);
    CHECK(first.evidences[2].evidence_index == 3);
}

TEST_CASE("embedding service scorer computes dot products") {
    auto transport = std::make_shared<ServiceTransport>();
    transport->reply = {{"vectors", {{1.0, 0.0}, {0.5, 0.5}, {2.0, 0.0}}}};
    Scorer scorer = Scorer::embedding_service("http://svc.invalid/embed", transport);
    auto evidence = make_evidence({"first", "second"});
    auto scores = scorer.score("query", evidence);
    REQUIRE(scores.size() == 2);
    CHECK(scores[0].score == doctest::Approx(0.5));
    CHECK(scores[1].score == doctest::Approx(2.0));
    CHECK(transport->last_request["texts"].size() == 3);

    // cosine variant normalizes
    Scorer cosine = Scorer::embedding_service("http://svc.invalid/embed", transport, true);
    auto cosine_scores = cosine.score("query", evidence);
    CHECK(cosine_scores[0].score == doctest::Approx(0.5 / (std::sqrt(0.5))));
    CHECK(cosine_scores[1].score == doctest::Approx(1.0));
}

TEST_CASE("service scorers reject count and dimension mismatches") {
    auto transport = std::make_shared<ServiceTransport>();
    transport->reply = {{"vectors", {{1.0, 0.0}, {0.5, 0.5}}}};  // one vector short
    Scorer scorer = Scorer::embedding_service("http://svc.invalid/embed", transport);
    CHECK_THROWS_AS(scorer.score("q", make_evidence({"a", "b"})), ScorerError);

    transport->reply = {{"vectors", {{1.0, 0.0}, {0.5}}}};
    CHECK_THROWS_AS(scorer.score("q", make_evidence({"a"})), ScorerError);

    transport->reply = {{"scores", {0.1}}};
    Scorer cross = Scorer::cross_encoder_service("http://svc.invalid/score", transport);
    CHECK_THROWS_AS(cross.score("q", make_evidence({"a", "b"})), ScorerError);
}

TEST_CASE("cross-encoder scores pass through with higher meaning more relevant") {
    // Negative log-probability scores are legal; -0.021 outranks -0.043.
    auto transport = std::make_shared<ServiceTransport>();
    transport->reply = {{"scores", {-0.043, -0.021}}};
    Scorer scorer = Scorer::cross_encoder_service("http://svc.invalid/score", transport);
    auto evidence = make_evidence(
        {"WNUT16 was a shared task on Named Entity Recognition over Twitter",
         "WNUT16 was a shared task on Named Entity Recognition over Twitter BIBREF10."});
    auto scores = scorer.score("unit", evidence);
    std::vector<ScoredEvidence> ranked = scores;
    sort_by_rank(ranked);
    CHECK(ranked[0].evidence_index == 1);
    CHECK(ranked[0].score == doctest::Approx(-0.021));
    CHECK(transport->last_request["query"] == "unit");
    CHECK(transport->last_request["candidates"].size() == 2);
}

TEST_CASE("pipeline determinism holds for decomposed and whole-sentence queries") {
    // Same scorer, two different unit lists: outputs differ only through the
    // query texts and merge order, and repeat identically.
    std::vector<std::string> corpus = {"coat the cast iron with primer",
                                       "priming creates a smooth surface",
                                       "buy paint at hardware stores"};
    Bm25Index index = build_index(make_evidence(corpus));
    auto run = [&](const std::vector<std::string>& queries) {
        std::vector<std::vector<ScoredEvidence>> per_unit;
        for (const auto& q : queries) per_unit.push_back(bm25_scores(index, q));
        return greedy_merge(dummy_units(queries.size()), per_unit, UnitKey::part(0));
    };
    auto nil_first = run({"coat the cast iron with primer and let it dry"});
    auto nil_second = run({"coat the cast iron with primer and let it dry"});
    auto cog_first = run({"coat the cast iron with primer", "priming creates a smooth surface"});
    auto cog_second = run({"coat the cast iron with primer", "priming creates a smooth surface"});
    REQUIRE(nil_first.evidences.size() == nil_second.evidences.size());
    CHECK(nil_first.evidences[0].evidence_index == nil_second.evidences[0].evidence_index);
    REQUIRE(cog_first.evidences.size() == 2);
    CHECK(cog_first.evidences.size() == cog_second.evidences.size());
    CHECK(cog_first.evidences[0].score == cog_second.evidences[0].score);
}

}  // TEST_SUITE
