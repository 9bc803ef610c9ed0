#include "attrkit/datasets.hpp"
#include "attrkit/decomposer.hpp"
#include "attrkit/evaluation.hpp"
#include "attrkit/llm_attributor.hpp"
#include "attrkit/retriever.hpp"
#include "attrkit/text.hpp"
#include "attrkit/types.hpp"
#include "attrkit/util.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

namespace py = pybind11;
using namespace attrkit;

namespace {

py::object json_to_py(const nlohmann::json& value) {
    py::module_ json_mod = py::module_::import("json");
    return json_mod.attr("loads")(value.dump());
}

std::vector<EvidenceSentence> to_evidence(const std::vector<std::string>& texts) {
    std::vector<EvidenceSentence> evidence;
    evidence.reserve(texts.size());
    for (size_t i = 0; i < texts.size(); ++i) {
        evidence.emplace_back(static_cast<int>(i), texts[i]);
    }
    return evidence;
}

Pos pos_from_name(const std::string& name) {
    if (name == "noun") return Pos::Noun;
    if (name == "pronoun") return Pos::Pronoun;
    if (name == "verb") return Pos::Verb;
    if (name == "article") return Pos::Article;
    if (name == "other") return Pos::Other;
    throw py::value_error("unknown tag '" + name + "'");
}

const LexiconTagger& default_tagger() {
    static LexiconTagger tagger;
    return tagger;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Post-hoc answer attribution toolkit: decomposition, BM25 scoring, "
              "greedy evidence merging, and retrieval evaluation.";

    // text utilities
    m.def("nfc", &nfc, py::arg("text"));
    m.def("casefold", &casefold, py::arg("text"));
    m.def("normalize_for_match", &normalize_for_match, py::arg("text"));
    m.def("levenshtein_similarity", &levenshtein_similarity, py::arg("a"), py::arg("b"));
    m.def("sha256_hex", &sha256_hex, py::arg("data"));
    m.def("round_half_even", &round_half_even, py::arg("value"), py::arg("digits") = 4);
    m.def("tokenize", &tokenize, py::arg("text"));
    m.def("split_sentences", &split_sentences, py::arg("text"));

    m.def(
        "pos_tag",
        [](const std::string& sentence) {
            TaggedSentence tagged = tag(sentence, default_tagger());
            std::vector<std::pair<std::string, std::string>> out;
            out.reserve(tagged.tags.size());
            for (const auto& pt : tagged.tags) {
                out.emplace_back(pt.token, std::string(to_string(pt.tag)));
            }
            return out;
        },
        py::arg("sentence"), "Tokenize and tag one sentence with the built-in tagger.");

    m.def(
        "is_simple",
        [](const std::string& sentence) { return is_simple(tag(sentence, default_tagger())); },
        py::arg("sentence"),
        "True when the sentence needs no decomposition (nouns/pronouns/articles "
        "plus at most one verb, no disqualifying punctuation).");

    m.def(
        "is_simple_tags",
        [](const std::vector<std::string>& tags, const std::string& punctuation) {
            TaggedSentence tagged;
            for (const auto& name : tags) tagged.tags.push_back(PosTag{pos_from_name(name), "t"});
            for (uint32_t cp : decode_utf8(punctuation)) tagged.punctuation_set.insert(cp);
            return is_simple(tagged);
        },
        py::arg("tags"), py::arg("punctuation") = "",
        "Classifier decision from explicit tags (noun/pronoun/verb/article/other).");

    // retrieval
    py::class_<Bm25Index>(m, "Bm25Index")
        .def(py::init([](const std::vector<std::string>& evidence, double k1, double b) {
                 return build_index(to_evidence(evidence), k1, b);
             }),
             py::arg("evidence"), py::arg("k1") = 1.2, py::arg("b") = 0.75)
        .def_property_readonly("size", [](const Bm25Index& idx) { return idx.size(); })
        .def_property_readonly("avg_length", [](const Bm25Index& idx) { return idx.avg_length; })
        .def("df", [](const Bm25Index& idx, const std::string& term) { return idx.df(term); },
             py::arg("term"))
        .def(
            "scores",
            [](const Bm25Index& idx, const std::string& query) {
                std::vector<double> out;
                for (const auto& se : bm25_scores(idx, query)) out.push_back(se.score);
                return out;
            },
            py::arg("query"), "One BM25 score per evidence sentence, in document order.");

    m.def(
        "greedy_merge",
        [](const std::vector<std::vector<double>>& per_unit_scores) {
            std::vector<InformationUnit> units;
            std::vector<std::vector<ScoredEvidence>> scored;
            for (size_t i = 0; i < per_unit_scores.size(); ++i) {
                units.emplace_back("unit", static_cast<int>(i), UnitOrigin::decomposed);
                std::vector<ScoredEvidence> list;
                for (size_t j = 0; j < per_unit_scores[i].size(); ++j) {
                    list.push_back(ScoredEvidence{per_unit_scores[i][j], static_cast<int>(j)});
                }
                scored.push_back(std::move(list));
            }
            AttributionSet merged = greedy_merge(units, scored, UnitKey::whole_answer());
            std::vector<std::pair<double, int>> out;
            for (const auto& se : merged.evidences) out.emplace_back(se.score, se.evidence_index);
            return out;
        },
        py::arg("per_unit_scores"),
        "Per-unit best-unused-evidence merge; rows are score lists over a "
        "shared evidence set. Returns (score, evidence_index) sorted by rank.");

    // evaluation
    m.def(
        "unit_pr",
        [](const std::set<int>& pred, const std::set<int>& gold) {
            PrValue pr = unit_pr(pred, gold);
            return py::make_tuple(pr.precision ? py::cast(*pr.precision) : py::none(),
                                  pr.recall ? py::cast(*pr.recall) : py::none());
        },
        py::arg("pred"), py::arg("gold"));

    m.def(
        "aggregate_metrics",
        [](const std::vector<std::pair<std::set<int>, std::set<int>>>& units, bool micro) {
            MetricTriple t = aggregate(units, micro);
            py::dict out;
            out["precision"] = t.precision ? py::cast(*t.precision) : py::none();
            out["recall"] = t.recall ? py::cast(*t.recall) : py::none();
            out["f1"] = t.f1 ? py::cast(*t.f1) : py::none();
            out["n_defined_precision"] = t.n_defined_precision;
            out["n_defined_recall"] = t.n_defined_recall;
            return out;
        },
        py::arg("units"), py::arg("micro") = false,
        "Macro (default) or micro aggregate P/R with F1 from the aggregates.");

    // decomposition plumbing
    m.def(
        "parse_decomposition",
        [](const std::string& raw, size_t n_parts) {
            try {
                ParsedDecomposition parsed = parse_decomposition(raw, n_parts);
                py::dict units;
                for (const auto& [index, list] : parsed.units_per_part) {
                    units[py::int_(index)] = list;
                }
                py::dict out;
                out["units"] = units;
                out["dropped"] = parsed.dropped;
                return out;
            } catch (const ParseError& e) {
                throw py::value_error(e.what());
            }
        },
        py::arg("raw"), py::arg("n_parts"));

    m.def(
        "parse_factscore_units",
        [](const std::string& raw) {
            try {
                return parse_factscore_units(raw);
            } catch (const ParseError& e) {
                throw py::value_error(e.what());
            }
        },
        py::arg("raw"));

    m.def(
        "build_cog_prompt",
        [](const std::string& question, const std::vector<std::string>& parts,
           bool include_negatives, size_t n_examples) {
            std::vector<AnswerPart> answer_parts;
            for (size_t i = 0; i < parts.size(); ++i) {
                answer_parts.emplace_back(static_cast<int>(i), parts[i]);
            }
            DecompositionStrategy strategy = include_negatives
                                                 ? DecompositionStrategy::cog(n_examples)
                                                 : DecompositionStrategy::cog_no_neg(n_examples);
            ChatRequest request =
                build_cog_prompt(Question("q", question), answer_parts, strategy, "model");
            return request.messages[0].content + "\n\n" + request.messages[1].content;
        },
        py::arg("question"), py::arg("parts"), py::arg("include_negatives") = true,
        py::arg("n_examples") = 1, "Rendered decomposition prompt text.");

    m.def(
        "build_attribution_prompt",
        [](const std::string& question, const std::vector<std::string>& answer_parts,
           const std::vector<std::string>& units, const std::vector<std::string>& candidates) {
            std::vector<AnswerPart> parts;
            for (size_t i = 0; i < answer_parts.size(); ++i) {
                parts.emplace_back(static_cast<int>(i), answer_parts[i]);
            }
            std::vector<InformationUnit> ius;
            for (const auto& u : units) ius.emplace_back(u, 0, UnitOrigin::decomposed);
            ChatRequest request = build_attribution_prompt(
                Question("q", question), parts, ius, to_evidence(candidates), {}, "model");
            return request.messages[0].content;
        },
        py::arg("question"), py::arg("answer_parts"), py::arg("units"), py::arg("candidates"));

    m.def(
        "resolve_evidence",
        [](const std::string& raw, const std::vector<std::string>& candidates, double threshold) {
            ResolutionOutcome outcome = parse_and_resolve(raw, to_evidence(candidates), threshold);
            py::list resolved;
            for (const auto& re : outcome.resolved) {
                py::dict item;
                item["index"] = re.evidence_index;
                item["match_kind"] = std::string(to_string(re.match_kind));
                item["similarity"] = re.similarity;
                resolved.append(item);
            }
            py::dict out;
            out["resolved"] = resolved;
            out["unresolved"] = outcome.unresolved;
            out["parse_failed"] = outcome.parse_failed;
            return out;
        },
        py::arg("raw"), py::arg("candidates"), py::arg("threshold") = 0.9,
        "Parse a bracketed evidence list and resolve strings to candidate indices.");

    // records
    m.def(
        "load_records",
        [](const std::string& path) {
            LoadResult loaded = load_records_jsonl(path);
            py::list out;
            for (const auto& record : loaded.records) out.append(json_to_py(record_to_json(record)));
            return out;
        },
        py::arg("path"), "Load TaskRecord JSONL into plain dicts.");

    m.def(
        "validate_record",
        [](const py::dict& record) {
            py::module_ json_mod = py::module_::import("json");
            std::string dumped = py::cast<std::string>(json_mod.attr("dumps")(record));
            return validate_record(record_from_json(nlohmann::json::parse(dumped)),
                                   count_sentences);
        },
        py::arg("record"), "Invariant violations for a record dict; empty means valid.");

#ifdef ATTRKIT_VERSION
    m.attr("__version__") = ATTRKIT_VERSION;
#else
    m.attr("__version__") = "dev";
#endif
}
