#include "attrkit/decomposer.hpp"

#include "attrkit/util.hpp"

#include <doctest.h>

#include <filesystem>

using namespace attrkit;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("attrkit-dec-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

GatewayConfig replay_config(const fs::path& cache_dir) {
    GatewayConfig config;
    config.model = "m1";
    config.cache_dir = cache_dir;
    return config;
}

TaskRecord sample_record() {
    TaskRecord record;
    record.id = "rec1";
    record.granularity = Granularity::per_sentence;
    record.question = Question("rec1", "paint cast iron");
    record.answer_parts = {
        AnswerPart(0, "Alex is an engineer."),  // classifier-simple
        AnswerPart(1, "Coat the cast iron with primer and let it dry overnight."),
        AnswerPart(2, "Would you like more information on this topic?"),
    };
    for (int i = 0; i < 6; ++i) {
        record.evidence.emplace_back(i, "Document sentence " + std::to_string(i) + ".");
    }
    record.gold = {GoldEntry{UnitKey::part(0), {}}, GoldEntry{UnitKey::part(1), {1}},
                   GoldEntry{UnitKey::part(2), {}}};
    return record;
}

const std::string kCogResponse =
    "GOOD ATOMIC FACTS:\n"
    "{\"Coat the cast iron with primer.\" : 2,\n"
    "\"Let the primer dry overnight.\" : 2}\n"
    "\n"
    "BAD ATOMIC FACTS:\n"
    "{\"Would you like more information on this topic?\" : 3}\n";

}  // namespace

TEST_SUITE("decomposer") {

TEST_CASE("cog prompt carries the schema blocks in order") {
    Question question("q", "Where was 'For You' by Rita Ora filmed?");
    std::vector<AnswerPart> parts = {AnswerPart(0, "First sentence."),
                                     AnswerPart(1, "Second sentence."),
                                     AnswerPart(2, "Third sentence.")};
    ChatRequest request = build_cog_prompt(question, parts, DecompositionStrategy::cog(), "m1");
    REQUIRE(request.messages.size() == 2);
    const std::string& system = request.messages[0].content;
    const std::string& user = request.messages[1].content;

    CHECK(system.find("You need to break down the answer for a given question into information "
                      "units.") != std::string::npos);
    CHECK(system.find("The answer is already split into sentences.") != std::string::npos);
    // five good-unit instructions
    CHECK(system.find("1. Give information units that are relevant to the sentence.") !=
          std::string::npos);
    CHECK(system.find("2. Information units should be meaningful.") != std::string::npos);
    CHECK(system.find("3. Break down information units at conjunctions.") != std::string::npos);
    CHECK(system.find("4. Information units should be co-referenced with respect to question.") !=
          std::string::npos);
    CHECK(system.find("5. When the information units are put back together, it should convey the "
                      "same information as the answer.") != std::string::npos);
    // four bad-unit instructions
    CHECK(system.find("1. Information units that convey duplicate information.") !=
          std::string::npos);
    CHECK(system.find("2. Information units that are non statements.") != std::string::npos);
    CHECK(system.find("3. Information units that are not meaningful to the question.") !=
          std::string::npos);
    CHECK(system.find("4. Information units that repeat facts present in the answer for "
                      "introduction, conclusion or summary of an answer.") != std::string::npos);

    // few-shot example with its good unit mapped to sentence 1
    CHECK(user.find("Where was 'For You' by Rita Ora filmed?") != std::string::npos);
    CHECK(user.find("\"The song 'For You' is performed by Liam Payne.\" : 1") != std::string::npos);
    CHECK(user.find("GOOD ATOMIC FACTS:") != std::string::npos);
    CHECK(user.find("BAD ATOMIC FACTS:") != std::string::npos);

    // instruction blocks precede examples, examples precede the target
    size_t target_pos = user.rfind("Third sentence.");
    size_t example_pos = user.find("Oheka Castle");
    CHECK(example_pos < target_pos);

    // the target answer is numbered 1..3
    CHECK(user.find("1:{\"First sentence.\"}") != std::string::npos);
    CHECK(user.find("2:{\"Second sentence.\"}") != std::string::npos);
    CHECK(user.find("3:{\"Third sentence.\"}") != std::string::npos);
}

TEST_CASE("cog_no_neg omits every bad-example block but keeps the instructions") {
    Question question("q", "any question");
    std::vector<AnswerPart> parts = {AnswerPart(0, "One sentence.")};
    ChatRequest request =
        build_cog_prompt(question, parts, DecompositionStrategy::cog_no_neg(2), "m1");
    CHECK(request.messages[1].content.find("BAD ATOMIC FACTS") == std::string::npos);
    CHECK(request.messages[0].content.find("Instruction on what bad information units are:") !=
          std::string::npos);
    CHECK(request.messages[1].content.find("GOOD ATOMIC FACTS") != std::string::npos);
}

TEST_CASE("prompt builders reject degenerate input") {
    CHECK_THROWS_AS(build_cog_prompt(Question("q", "text"), {}, DecompositionStrategy::cog(), "m"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        build_factscore_prompt(Question("q", "text"), AnswerPart(0, "   "), "m"),
        std::invalid_argument);
    DecompositionStrategy bad{StrategyKind::COG, {}};
    CHECK_THROWS_AS(
        build_cog_prompt(Question("q", "t"), {AnswerPart(0, "s.")}, bad, "m"),
        std::invalid_argument);
    // cog without any bad-unit exemplar is invalid; cog_no_neg is fine
    DecompositionStrategy no_neg_examples{StrategyKind::COG, default_cog_examples()};
    no_neg_examples.few_shot_examples[0].bad_units.clear();
    no_neg_examples.few_shot_examples[1].bad_units.clear();
    CHECK_THROWS_AS(validate_strategy(no_neg_examples), std::invalid_argument);
    no_neg_examples.kind = StrategyKind::COG_NO_NEG;
    CHECK_NOTHROW(validate_strategy(no_neg_examples));
}

TEST_CASE("parse_decomposition maps facts to 0-based parts") {
    ParsedDecomposition parsed = parse_decomposition("{\"fact A\": 1, \"fact B\": 1}", 1);
    REQUIRE(parsed.units_per_part.count(0) == 1);
    CHECK(parsed.units_per_part[0] == std::vector<std::string>{"fact A", "fact B"});
    CHECK(parsed.dropped == 0);
}

TEST_CASE("parse_decomposition ignores the bad block and keeps order") {
    ParsedDecomposition parsed = parse_decomposition(kCogResponse, 3);
    CHECK(parsed.units_per_part.count(2) == 0);  // bad fact not attributed to part 2
    REQUIRE(parsed.units_per_part.count(1) == 1);
    CHECK(parsed.units_per_part[1] ==
          std::vector<std::string>{"Coat the cast iron with primer.", "Let the primer dry overnight."});
}

TEST_CASE("parse_decomposition drops and counts out-of-range facts") {
    ParsedDecomposition parsed =
        parse_decomposition("{\"in range\": 2, \"too far\": 7, \"zero\": 0}", 3);
    CHECK(parsed.dropped == 2);
    CHECK(parsed.units_per_part.size() == 1);
}

TEST_CASE("parse_decomposition repairs common drift") {
    SUBCASE("code fences") {
        ParsedDecomposition parsed =
            parse_decomposition("```json\n{\"f\": 1}\n```", 1);
        CHECK(parsed.units_per_part[0] == std::vector<std::string>{"f"});
    }
    SUBCASE("trailing commas") {
        ParsedDecomposition parsed = parse_decomposition("{\"f\": 1,}", 1);
        CHECK(parsed.units_per_part[0] == std::vector<std::string>{"f"});
    }
    SUBCASE("single quotes") {
        ParsedDecomposition parsed = parse_decomposition("{'f': 1}", 1);
        CHECK(parsed.units_per_part[0] == std::vector<std::string>{"f"});
    }
    SUBCASE("string-valued sentence numbers") {
        ParsedDecomposition parsed = parse_decomposition("{\"f\": \"1\"}", 1);
        CHECK(parsed.units_per_part[0] == std::vector<std::string>{"f"});
    }
}

TEST_CASE("parse_decomposition raises on unusable responses") {
    CHECK_THROWS_AS(parse_decomposition("I could not decompose this.", 2), ParseError);
    CHECK_THROWS_AS(parse_decomposition("", 2), ParseError);
}

TEST_CASE("parse_factscore_units accepts arrays and bullet lines") {
    CHECK(parse_factscore_units("[\"a fact\", \"another\"]") ==
          std::vector<std::string>{"a fact", "another"});
    CHECK(parse_factscore_units("- first\n- second\n") ==
          std::vector<std::string>{"first", "second"});
    CHECK(parse_factscore_units("FACTS:\n1. one\n2) two\n") ==
          std::vector<std::string>{"one", "two"});
    CHECK_THROWS_AS(parse_factscore_units("   \n"), ParseError);
}

TEST_CASE("decompose NIL maps every part to one passthrough unit, no gateway") {
    fs::path cache_dir = fresh_dir("nil");
    // Replay over an empty cache: any completion attempt would throw.
    Gateway gateway(replay_config(cache_dir), GatewayMode::replay, nullptr);
    LexiconTagger tagger;
    TaskRecord record = sample_record();
    DecompositionResult result = decompose(record, DecompositionStrategy::nil(), gateway, tagger);
    CHECK(gateway.completions() == 0);
    REQUIRE(result.per_sentence_units.size() == 3);
    for (const auto& part : record.answer_parts) {
        REQUIRE(result.per_sentence_units.at(part.index).size() == 1);
        const InformationUnit& unit = result.per_sentence_units.at(part.index)[0];
        CHECK(unit.origin == UnitOrigin::passthrough);
        CHECK(unit.text == part.text);  // byte-equal to the source sentence
        CHECK(unit.source_part_index == part.index);
    }
    CHECK(mean_units_per_sentence(result) == 1.0);
}

TEST_CASE("decompose COG: bypass, mapping, and empty lists for unmentioned parts") {
    fs::path cache_dir = fresh_dir("cog");
    TaskRecord record = sample_record();
    DecompositionStrategy strategy = DecompositionStrategy::cog();
    {
        ResponseCache cache(cache_dir);
        ChatRequest request = build_cog_prompt(record.question, record.answer_parts, strategy, "m1");
        cache.store(request, kCogResponse);
    }
    Gateway gateway(replay_config(cache_dir), GatewayMode::replay, nullptr);
    LexiconTagger tagger;
    DecompositionResult result = decompose(record, strategy, gateway, tagger);

    CHECK(result.bypassed_parts == std::set<int>{0});
    REQUIRE(result.per_sentence_units.at(0).size() == 1);
    CHECK(result.per_sentence_units.at(0)[0].origin == UnitOrigin::passthrough);

    REQUIRE(result.per_sentence_units.at(1).size() == 2);
    CHECK(result.per_sentence_units.at(1)[0].text == "Coat the cast iron with primer.");
    CHECK(result.per_sentence_units.at(1)[0].origin == UnitOrigin::decomposed);

    // part 2 got no good facts: non-attributable, empty list
    CHECK(result.per_sentence_units.at(2).empty());
    CHECK(result.parse_errors.empty());

    for (const auto& [index, units] : result.per_sentence_units) {
        for (const auto& unit : units) CHECK(unit.source_part_index == index);
    }
}

TEST_CASE("decompose skips the gateway when every part is classifier-simple") {
    fs::path cache_dir = fresh_dir("allsimple");
    Gateway gateway(replay_config(cache_dir), GatewayMode::replay, nullptr);
    LexiconTagger tagger;
    TaskRecord record = sample_record();
    record.answer_parts = {AnswerPart(0, "Alex is an engineer."), AnswerPart(1, "The cat.")};
    record.gold = {GoldEntry{UnitKey::part(0), {}}, GoldEntry{UnitKey::part(1), {}}};
    DecompositionResult result = decompose(record, DecompositionStrategy::cog(), gateway, tagger);
    CHECK(gateway.completions() == 0);
    CHECK(result.bypassed_parts.size() == 2);
    CHECK(mean_units_per_sentence(result) == 1.0);
}

TEST_CASE("decompose falls back to passthrough on a parse failure") {
    fs::path cache_dir = fresh_dir("parsefail");
    TaskRecord record = sample_record();
    DecompositionStrategy strategy = DecompositionStrategy::cog();
    {
        ResponseCache cache(cache_dir);
        ChatRequest request = build_cog_prompt(record.question, record.answer_parts, strategy, "m1");
        cache.store(request, "Sorry, I cannot help with that.");
    }
    Gateway gateway(replay_config(cache_dir), GatewayMode::replay, nullptr);
    LexiconTagger tagger;
    DecompositionResult result = decompose(record, strategy, gateway, tagger);
    REQUIRE(result.parse_errors.size() == 2);  // parts 1 and 2 (0 was bypassed)
    CHECK(result.per_sentence_units.at(1).size() == 1);
    CHECK(result.per_sentence_units.at(1)[0].origin == UnitOrigin::passthrough);
    CHECK(result.per_sentence_units.at(1)[0].text == record.answer_parts[1].text);
}

TEST_CASE("decompose FACTSCORE calls per pending part and dedups units") {
    fs::path cache_dir = fresh_dir("factscore");
    TaskRecord record = sample_record();
    {
        ResponseCache cache(cache_dir);
        cache.store(build_factscore_prompt(record.question, record.answer_parts[1], "m1"),
                    "- Coat the cast iron with primer.\n- Coat the cast iron with primer.\n- Let "
                    "it dry overnight.\n");
        cache.store(build_factscore_prompt(record.question, record.answer_parts[2], "m1"),
                    "- The person asks a question.\n");
    }
    Gateway gateway(replay_config(cache_dir), GatewayMode::replay, nullptr);
    LexiconTagger tagger;
    DecompositionResult result =
        decompose(record, DecompositionStrategy::factscore(), gateway, tagger);
    CHECK(gateway.completions() == 2);  // part 0 bypassed
    CHECK(result.per_sentence_units.at(1).size() == 2);  // duplicate collapsed
    CHECK(result.per_sentence_units.at(2).size() == 1);
}

TEST_CASE("gateway errors carry record context") {
    fs::path cache_dir = fresh_dir("gwerr");
    Gateway gateway(replay_config(cache_dir), GatewayMode::replay, nullptr);
    LexiconTagger tagger;
    TaskRecord record = sample_record();
    try {
        decompose(record, DecompositionStrategy::cog(), gateway, tagger);
        FAIL("expected cache miss");
    } catch (const GatewayError& e) {
        CHECK(e.kind == GatewayErrorKind::cache_miss);
        CHECK(std::string(e.what()).find("rec1") != std::string::npos);
    }
}

TEST_CASE("decomposition JSONL round trip") {
    fs::path cache_dir = fresh_dir("jsonl");
    Gateway gateway(replay_config(cache_dir), GatewayMode::replay, nullptr);
    LexiconTagger tagger;
    TaskRecord record = sample_record();
    DecompositionResult result = decompose(record, DecompositionStrategy::nil(), gateway, tagger);
    result.dropped_units = 3;
    result.parse_errors.push_back({1, "synthetic"});

    nlohmann::json row = decomposition_to_json(record.id, result);
    std::string record_id;
    DecompositionResult loaded = decomposition_from_json(row, &record_id);
    CHECK(record_id == record.id);
    CHECK(loaded.strategy == result.strategy);
    CHECK(loaded.dropped_units == 3);
    REQUIRE(loaded.parse_errors.size() == 1);
    CHECK(loaded.per_sentence_units.size() == result.per_sentence_units.size());
    for (const auto& [index, units] : result.per_sentence_units) {
        REQUIRE(loaded.per_sentence_units.count(index) == 1);
        REQUIRE(loaded.per_sentence_units.at(index).size() == units.size());
        for (size_t i = 0; i < units.size(); ++i) {
            CHECK(loaded.per_sentence_units.at(index)[i].text == units[i].text);
            CHECK(loaded.per_sentence_units.at(index)[i].origin == units[i].origin);
        }
    }
}

}  // TEST_SUITE
