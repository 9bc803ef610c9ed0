#include "attrkit/decomposer.hpp"

#include "attrkit/jsonish.hpp"
#include "attrkit/util.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace attrkit {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::NIL: return "nil";
        case StrategyKind::FACTSCORE: return "factscore";
        case StrategyKind::COG: return "cog";
        case StrategyKind::COG_NO_NEG: return "cog_no_neg";
    }
    return "nil";
}

std::optional<StrategyKind> strategy_from_string(std::string_view s) {
    if (s == "nil") return StrategyKind::NIL;
    if (s == "factscore") return StrategyKind::FACTSCORE;
    if (s == "cog") return StrategyKind::COG;
    if (s == "cog_no_neg") return StrategyKind::COG_NO_NEG;
    return std::nullopt;
}

const std::vector<FewShotExample>& default_cog_examples() {
    static const std::vector<FewShotExample> examples = {
        FewShotExample{
            "Where was 'For You' by Rita Ora filmed?",
            {"The music video for 'For You' by Liam Payne and Rita Ora was filmed at Oheka "
             "Castle on Long Island, off the coast of the eastern United States."},
            {
                {"The song 'For You' is performed by Liam Payne.", 1},
                {"The song 'For You' is performed by Rita Ora.", 1},
                {"The music video for 'For You' was filmed at Oheka Castle.", 1},
                {"Oheka Castle is located on Long Island.", 1},
                {"Long Island is off the coast of the eastern United States.", 1},
            },
            {
                {"The song is 'For You'.", 1},
                {"Liam Payne and Rita Ora were filmed.", 1},
            },
        },
        FewShotExample{
            "paint cast iron",
            {"Are you looking for information on how to paint cast iron?",
             "If so, I found a helpful article on wikiHow that provides a step-by-step guide on "
             "how to paint cast iron.",
             "The process involves prepping the cast iron by cleaning it and removing any rust "
             "or old paint.",
             "Then, you can prime and paint the cast iron using an oil-based primer and paint.",
             "Would you like more information on this topic?"},
            {
                {"The process involves prepping the cast iron by cleaning it.", 3},
                {"The process involves prepping the cast iron by removing any rust or old paint.", 3},
                {"Prime the cast iron using an oil-based primer.", 4},
                {"Paint the cast iron using an oil-based paint.", 4},
            },
            {
                {"Are you looking for information on how to paint cast iron?", 1},
                {"I found a helpful article on wikiHow.", 2},
                {"You can prime and paint the cast iron.", 4},
                {"Would you like more information on this topic?", 5},
            },
        },
    };
    return examples;
}

DecompositionStrategy DecompositionStrategy::nil() { return {StrategyKind::NIL, {}}; }

DecompositionStrategy DecompositionStrategy::factscore() { return {StrategyKind::FACTSCORE, {}}; }

DecompositionStrategy DecompositionStrategy::cog(size_t n_examples) {
    return with_kind(StrategyKind::COG, n_examples);
}

DecompositionStrategy DecompositionStrategy::cog_no_neg(size_t n_examples) {
    return with_kind(StrategyKind::COG_NO_NEG, n_examples);
}

DecompositionStrategy DecompositionStrategy::with_kind(StrategyKind kind, size_t n_examples) {
    DecompositionStrategy strategy{kind, {}};
    if (kind == StrategyKind::COG || kind == StrategyKind::COG_NO_NEG) {
        const auto& all = default_cog_examples();
        n_examples = std::clamp<size_t>(n_examples, 1, all.size());
        strategy.few_shot_examples.assign(all.begin(), all.begin() + n_examples);
    }
    return strategy;
}

void validate_strategy(const DecompositionStrategy& strategy) {
    if (strategy.kind == StrategyKind::COG || strategy.kind == StrategyKind::COG_NO_NEG) {
        if (strategy.few_shot_examples.empty()) {
            throw std::invalid_argument("coarse-grained strategies need at least one few-shot example");
        }
        if (strategy.kind == StrategyKind::COG &&
            std::none_of(strategy.few_shot_examples.begin(), strategy.few_shot_examples.end(),
                         [](const FewShotExample& e) { return !e.bad_units.empty(); })) {
            throw std::invalid_argument("cog requires at least one example with bad units");
        }
    }
}

namespace {

std::string quoted(const std::string& s) { return json(s).dump(); }

// [1:{"first sentence"}, 2:{"second sentence"}]
std::string render_numbered_answer(const std::vector<std::string>& sentences) {
    std::string out = "[";
    for (size_t i = 0; i < sentences.size(); ++i) {
        if (i > 0) out += ", ";
        out += std::to_string(i + 1) + ":{" + quoted(sentences[i]) + "}";
    }
    out += "]";
    return out;
}

std::string render_fact_map(const std::vector<std::pair<std::string, int>>& facts) {
    std::string out = "{";
    for (size_t i = 0; i < facts.size(); ++i) {
        if (i > 0) out += ",\n";
        out += quoted(facts[i].first) + " : " + std::to_string(facts[i].second);
    }
    out += "}";
    return out;
}

const char* kCogTaskDefinition =
    "You are a helpful assistant. You will be given a question and corresponding answer that is "
    "grounded to document. You need to break down the answer for a given question into "
    "information units. The answer is already split into sentences. Map each sentence from the "
    "answer to the corresponding information unit/ units. Give only those information units "
    "that are attributable to the grounded document.";

const char* kCogGoodInstructions =
    "Instruction on what good information units are:\n"
    "1. Give information units that are relevant to the sentence.\n"
    "2. Information units should be meaningful.\n"
    "3. Break down information units at conjunctions.\n"
    "4. Information units should be co-referenced with respect to question.\n"
    "5. When the information units are put back together, it should convey the same information "
    "as the answer.";

const char* kCogBadInstructions =
    "Instruction on what bad information units are:\n"
    "1. Information units that convey duplicate information.\n"
    "2. Information units that are non statements.\n"
    "3. Information units that are not meaningful to the question.\n"
    "4. Information units that repeat facts present in the answer for introduction, conclusion "
    "or summary of an answer.";

}  // namespace

ChatRequest build_cog_prompt(const Question& question, const std::vector<AnswerPart>& parts,
                             const DecompositionStrategy& strategy, const std::string& model_id,
                             double temperature) {
    if (strategy.kind != StrategyKind::COG && strategy.kind != StrategyKind::COG_NO_NEG) {
        throw std::invalid_argument("build_cog_prompt requires a coarse-grained strategy");
    }
    if (parts.empty()) {
        throw std::invalid_argument("cannot build a decomposition prompt for an empty answer");
    }
    validate_strategy(strategy);

    std::string system = std::string(kCogTaskDefinition) + "\n\n" + kCogGoodInstructions + "\n\n" +
                         kCogBadInstructions;

    std::string user = "Examples:\n";
    for (const auto& example : strategy.few_shot_examples) {
        user += "\nQUESTION:\n" + quoted(example.question) + "\n\n";
        user += "ANSWER:\n" + render_numbered_answer(example.answer_sentences) + "\n\n";
        user += "GOOD ATOMIC FACTS:\n" + render_fact_map(example.good_units) + "\n";
        if (strategy.kind == StrategyKind::COG && !example.bad_units.empty()) {
            user += "\nBAD ATOMIC FACTS:\n" + render_fact_map(example.bad_units) + "\n";
        }
    }
    std::vector<std::string> sentences;
    sentences.reserve(parts.size());
    for (const auto& part : parts) sentences.push_back(part.text);
    user += "\nQUESTION:\n" + quoted(question.text) + "\n\n";
    user += "ANSWER:\n" + render_numbered_answer(sentences) + "\n\n";
    user += "GOOD ATOMIC FACTS:\n";

    return ChatRequest{model_id,
                       {{ChatRole::system, std::move(system)}, {ChatRole::user, std::move(user)}},
                       temperature};
}

ChatRequest build_factscore_prompt(const Question& question, const AnswerPart& part,
                                   const std::string& model_id, double temperature) {
    if (trim(part.text).empty()) {
        throw std::invalid_argument("cannot decompose an empty sentence");
    }
    std::string system =
        "You are a helpful assistant. Break down the given answer sentence into atomic facts. "
        "An atomic fact is a short standalone sentence that conveys a single piece of "
        "information. Split exhaustively: break at every conjunction and relative clause, and "
        "do not leave out any information from the sentence. Do not add information that is not "
        "stated. Output one fact per line, each line starting with \"- \".";

    std::string user =
        "QUESTION: \"Who founded the company?\"\n"
        "SENTENCE: \"The company was founded in 1998 by two graduate students in a garage.\"\n"
        "FACTS:\n"
        "- The company was founded in 1998.\n"
        "- The company was founded by two graduate students.\n"
        "- The company was founded in a garage.\n"
        "\n"
        "QUESTION: \"What is the capital of France?\"\n"
        "SENTENCE: \"Paris is the capital of France.\"\n"
        "FACTS:\n"
        "- Paris is the capital of France.\n"
        "\n"
        "QUESTION: " + quoted(question.text) + "\n"
        "SENTENCE: " + quoted(part.text) + "\n"
        "FACTS:\n";

    return ChatRequest{model_id,
                       {{ChatRole::system, std::move(system)}, {ChatRole::user, std::move(user)}},
                       temperature};
}

namespace {

std::string lowercase_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

ParsedDecomposition parse_decomposition(std::string_view raw, size_t n_parts) {
    ParsedDecomposition result;
    std::string cleaned = strip_code_fences(raw);
    std::string lower = lowercase_ascii(cleaned);

    std::string_view section = cleaned;
    size_t good = lower.find("good atomic facts");
    if (good != std::string::npos) {
        size_t begin = good;
        size_t end = lower.find("bad atomic facts", begin);
        section = std::string_view(cleaned).substr(begin, end == std::string::npos ? std::string::npos
                                                                                   : end - begin);
    }
    auto block = extract_balanced(section, '{', '}');
    if (!block) {
        throw ParseError("no fact map found in decomposition response");
    }
    auto parsed = parse_lenient(*block);
    if (!parsed || !parsed->is_object()) {
        throw ParseError("fact map is not a parseable object");
    }
    for (const auto& [fact, value] : parsed->items()) {
        int sentence = -1;
        if (value.is_number_integer()) {
            sentence = value.get<int>();
        } else if (value.is_string()) {
            try {
                sentence = std::stoi(value.get<std::string>());
            } catch (...) {
                sentence = -1;
            }
        }
        if (sentence < 1 || sentence > static_cast<int>(n_parts)) {
            ++result.dropped;
            continue;
        }
        std::string text = nfc(trim(fact));
        if (text.empty()) {
            ++result.dropped;
            continue;
        }
        auto& units = result.units_per_part[sentence - 1];
        if (std::find(units.begin(), units.end(), text) == units.end()) {
            units.push_back(std::move(text));
        }
    }
    return result;
}

std::vector<std::string> parse_factscore_units(std::string_view raw) {
    std::string cleaned = strip_code_fences(raw);
    std::vector<std::string> facts;

    if (auto block = extract_balanced(cleaned, '[', ']')) {
        if (auto parsed = parse_lenient(*block); parsed && parsed->is_array()) {
            for (const auto& item : *parsed) {
                if (item.is_string()) {
                    std::string text = trim(item.get<std::string>());
                    if (!text.empty()) facts.push_back(std::move(text));
                }
            }
        }
    }
    if (facts.empty()) {
        std::istringstream in(cleaned);
        std::string line;
        while (std::getline(in, line)) {
            std::string s = trim(line);
            if (s.empty() || s.back() == ':') continue;
            size_t i = 0;
            while (i < s.size() && (s[i] == '-' || s[i] == '*' || s[i] == '>' ||
                                    std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' ||
                                    s[i] == ')')) {
                ++i;
                if (i < s.size() && s[i] == ' ') break;
            }
            s = trim(s.substr(i));
            if (!s.empty()) facts.push_back(std::move(s));
        }
    }
    if (facts.empty()) {
        throw ParseError("no facts found in decomposition response");
    }
    return facts;
}

namespace {

InformationUnit passthrough_unit(const AnswerPart& part) {
    return InformationUnit(part.text, part.index, UnitOrigin::passthrough);
}

[[noreturn]] void rethrow_with_context(const GatewayError& e, const std::string& context) {
    throw GatewayError(e.kind, context + ": " + e.what(), e.status, e.body);
}

std::vector<InformationUnit> dedup_units(const std::vector<std::string>& texts, int part_index) {
    std::vector<InformationUnit> units;
    for (const auto& text : texts) {
        std::string normalized = nfc(trim(text));
        if (normalized.empty()) continue;
        bool seen = std::any_of(units.begin(), units.end(),
                                [&](const InformationUnit& u) { return u.text == normalized; });
        if (!seen) units.emplace_back(normalized, part_index, UnitOrigin::decomposed);
    }
    return units;
}

}  // namespace

DecompositionResult decompose(const TaskRecord& record, const DecompositionStrategy& strategy,
                              Gateway& gateway, const TaggerBackend& classifier) {
    DecompositionResult result;
    result.strategy = strategy.kind;

    if (strategy.kind == StrategyKind::NIL) {
        for (const auto& part : record.answer_parts) {
            result.per_sentence_units[part.index] = {passthrough_unit(part)};
        }
        return result;
    }
    validate_strategy(strategy);

    std::vector<int> pending;
    for (const auto& part : record.answer_parts) {
        TaggedSentence tagged = tag(part.text, classifier);
        if (is_simple(tagged)) {
            result.bypassed_parts.insert(part.index);
            result.per_sentence_units[part.index] = {passthrough_unit(part)};
        } else {
            pending.push_back(part.index);
            result.per_sentence_units[part.index] = {};
        }
    }
    if (pending.empty()) {
        return result;
    }

    const std::string& model = gateway.config().model;
    if (strategy.kind == StrategyKind::COG || strategy.kind == StrategyKind::COG_NO_NEG) {
        ChatRequest request = build_cog_prompt(record.question, record.answer_parts, strategy, model);
        ChatResponse response;
        try {
            response = gateway.complete(request);
        } catch (const GatewayError& e) {
            rethrow_with_context(e, "record " + record.id + " decomposition");
        }
        result.raw_response = response.content;
        try {
            ParsedDecomposition parsed = parse_decomposition(response.content, record.answer_parts.size());
            result.dropped_units = parsed.dropped;
            for (int index : pending) {
                auto it = parsed.units_per_part.find(index);
                if (it != parsed.units_per_part.end()) {
                    result.per_sentence_units[index] = dedup_units(it->second, index);
                }
                // absent => the decomposer deemed the sentence non-attributable
            }
        } catch (const ParseError& e) {
            for (int index : pending) {
                result.per_sentence_units[index] = {passthrough_unit(record.answer_parts[index])};
                result.parse_errors.push_back({index, e.what()});
            }
        }
    } else {  // FACTSCORE: one call per non-simple sentence
        std::vector<std::string> raws;
        for (int index : pending) {
            ChatRequest request =
                build_factscore_prompt(record.question, record.answer_parts[index], model);
            ChatResponse response;
            try {
                response = gateway.complete(request);
            } catch (const GatewayError& e) {
                rethrow_with_context(e, "record " + record.id + " part " + std::to_string(index));
            }
            raws.push_back(response.content);
            try {
                result.per_sentence_units[index] =
                    dedup_units(parse_factscore_units(response.content), index);
            } catch (const ParseError& e) {
                result.per_sentence_units[index] = {passthrough_unit(record.answer_parts[index])};
                result.parse_errors.push_back({index, e.what()});
            }
        }
        result.raw_response = join(raws, "\n---\n");
    }
    return result;
}

double mean_units_per_sentence(const DecompositionResult& result) {
    if (result.per_sentence_units.empty()) return 0.0;
    size_t total = 0;
    for (const auto& [index, units] : result.per_sentence_units) total += units.size();
    return static_cast<double>(total) / static_cast<double>(result.per_sentence_units.size());
}

nlohmann::json decomposition_to_json(const std::string& record_id, const DecompositionResult& result) {
    json units_json = json::object();
    for (const auto& [index, units] : result.per_sentence_units) {
        json list = json::array();
        for (const auto& unit : units) {
            list.push_back({{"text", unit.text},
                            {"origin", unit.origin == UnitOrigin::passthrough ? "passthrough"
                                                                              : "decomposed"}});
        }
        units_json[std::to_string(index)] = std::move(list);
    }
    json errors = json::array();
    for (const auto& err : result.parse_errors) {
        errors.push_back({{"part", err.part_index}, {"message", err.message}});
    }
    return json{{"record_id", record_id},
                {"strategy", std::string(to_string(result.strategy))},
                {"per_sentence_units", std::move(units_json)},
                {"drops", result.dropped_units},
                {"parse_errors", std::move(errors)},
                {"bypassed_parts", result.bypassed_parts}};
}

DecompositionResult decomposition_from_json(const nlohmann::json& row, std::string* record_id) {
    DecompositionResult result;
    if (record_id) *record_id = row.at("record_id").get<std::string>();
    auto kind = strategy_from_string(row.at("strategy").get<std::string>());
    if (!kind) {
        throw ParseError("unknown strategy in decomposition row");
    }
    result.strategy = *kind;
    result.dropped_units = row.value("drops", 0);
    for (const auto& [key, list] : row.at("per_sentence_units").items()) {
        int index = std::stoi(key);
        std::vector<InformationUnit> units;
        for (const auto& item : list) {
            UnitOrigin origin = item.value("origin", "decomposed") == "passthrough"
                                    ? UnitOrigin::passthrough
                                    : UnitOrigin::decomposed;
            units.emplace_back(item.at("text").get<std::string>(), index, origin);
        }
        result.per_sentence_units[index] = std::move(units);
    }
    if (row.contains("parse_errors")) {
        for (const auto& err : row.at("parse_errors")) {
            result.parse_errors.push_back(
                {err.value("part", 0), err.value("message", std::string())});
        }
    }
    if (row.contains("bypassed_parts")) {
        for (const auto& v : row.at("bypassed_parts")) result.bypassed_parts.insert(v.get<int>());
    }
    return result;
}

}  // namespace attrkit
