// Builds the committed fixture set: synthetic TaskRecords, a recorded LLM
// response cache produced by a deterministic scripted transport, and the
// golden stage-output hashes that the replay acceptance test checks against.

#include "attrkit/datasets.hpp"
#include "attrkit/jsonish.hpp"
#include "attrkit/pipeline.hpp"
#include "attrkit/util.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace attrkit;

namespace {

// Deterministic stand-in for a chat model. Parses the prompt the same way a
// human would skim it and produces plausible, reproducible completions.
class ScriptedTransport : public Transport {
public:
    HttpResult post_json(const std::string&, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>&) override {
        json request = json::parse(body);
        std::string system;
        std::string user;
        for (const auto& message : request.at("messages")) {
            if (message.at("role") == "system") system = message.at("content");
            if (message.at("role") == "user") user = message.at("content");
        }
        std::string content;
        if (user.find("OUTPUT LIST:") != std::string::npos) {
            content = answer_attribution(user);
        } else if (system.find("atomic facts") != std::string::npos) {
            content = answer_factscore(user);
        } else {
            content = answer_cog(user);
        }
        json response = {{"choices", json::array({{{"message", {{"content", content}}}}})}};
        return HttpResult{200, response.dump()};
    }

private:
    static std::vector<std::string> parse_numbered_answer(const std::string& user) {
        // Last "ANSWER:\n[1:{...}, 2:{...}]" block belongs to the target.
        size_t pos = user.rfind("ANSWER:\n");
        std::vector<std::string> sentences;
        if (pos == std::string::npos) return sentences;
        auto block = extract_balanced(std::string_view(user).substr(pos), '[', ']');
        if (!block) return sentences;
        std::string_view rest = *block;
        while (true) {
            size_t brace = rest.find('{');
            if (brace == std::string_view::npos) break;
            auto item = extract_balanced(rest.substr(brace), '{', '}');
            if (!item) break;
            std::string inner = item->substr(1, item->size() - 2);
            json parsed = json::parse(inner, nullptr, false);
            sentences.push_back(parsed.is_string() ? parsed.get<std::string>() : inner);
            rest = rest.substr(brace + item->size());
        }
        return sentences;
    }

    static std::vector<std::string> clause_split(const std::string& sentence) {
        std::string text = trim(sentence);
        if (!text.empty() && (text.back() == '.' || text.back() == '!')) text.pop_back();
        size_t pos = text.find(" and ");
        std::vector<std::string> clauses;
        if (pos == std::string::npos) {
            clauses.push_back(text);
        } else {
            clauses.push_back(trim(text.substr(0, pos)));
            clauses.push_back(trim(text.substr(pos + 5)));
        }
        for (auto& clause : clauses) {
            if (!clause.empty()) clause += ".";
        }
        return clauses;
    }

    static std::string answer_cog(const std::string& user) {
        std::vector<std::string> sentences = parse_numbered_answer(user);
        std::string good = "{";
        std::string bad = "{";
        bool first_good = true, first_bad = true;
        for (size_t i = 0; i < sentences.size(); ++i) {
            const std::string& sentence = sentences[i];
            if (sentence.find('?') != std::string::npos) {
                if (!first_bad) bad += ",\n";
                bad += json(sentence).dump() + " : " + std::to_string(i + 1);
                first_bad = false;
                continue;  // non-attributable
            }
            for (const auto& clause : clause_split(sentence)) {
                if (clause.empty()) continue;
                if (!first_good) good += ",\n";
                good += json(clause).dump() + " : " + std::to_string(i + 1);
                first_good = false;
            }
        }
        good += "}";
        bad += "}";
        return "GOOD ATOMIC FACTS:\n" + good + "\n\nBAD ATOMIC FACTS:\n" + bad + "\n";
    }

    static std::string answer_factscore(const std::string& user) {
        size_t pos = user.rfind("SENTENCE: ");
        std::string sentence;
        if (pos != std::string::npos) {
            size_t eol = user.find('\n', pos);
            std::string quoted = user.substr(pos + 10, eol - pos - 10);
            json parsed = json::parse(quoted, nullptr, false);
            sentence = parsed.is_string() ? parsed.get<std::string>() : quoted;
        }
        std::string out;
        for (const auto& clause : clause_split(sentence)) {
            std::string flat = clause;
            size_t comma;
            while ((comma = flat.find(", ")) != std::string::npos) {
                out += "- " + trim(flat.substr(0, comma)) + ".\n";
                flat = flat.substr(comma + 2);
            }
            if (!trim(flat).empty()) out += "- " + trim(flat) + "\n";
        }
        if (out.empty()) out = "- " + sentence + "\n";
        return out;
    }

    static std::string answer_attribution(const std::string& user) {
        auto read_list = [&](const std::string& label) {
            std::vector<std::string> items;
            size_t pos = user.find(label);
            if (pos == std::string::npos) return items;
            auto block = extract_balanced(std::string_view(user).substr(pos), '[', ']');
            if (!block) return items;
            json parsed = json::parse(*block, nullptr, false);
            if (parsed.is_array()) {
                for (const auto& item : parsed) {
                    if (item.is_string()) items.push_back(item.get<std::string>());
                }
            }
            return items;
        };
        std::vector<std::string> units = read_list("INFORMATION UNITS: ");
        std::vector<std::string> evidences = read_list("EVIDENCES: ");

        std::set<std::string> unit_tokens;
        for (const auto& unit : units) {
            for (const auto& tok : tokenize(unit)) unit_tokens.insert(tok);
        }
        std::vector<std::pair<double, size_t>> scored;
        for (size_t i = 0; i < evidences.size(); ++i) {
            std::vector<std::string> tokens = tokenize(evidences[i]);
            if (tokens.empty()) continue;
            int hit = 0;
            for (const auto& tok : tokens) hit += unit_tokens.count(tok) > 0 ? 1 : 0;
            double overlap = static_cast<double>(hit) / static_cast<double>(tokens.size());
            if (overlap >= 0.5) scored.emplace_back(-overlap, i);
        }
        std::sort(scored.begin(), scored.end());
        json out = json::array();
        for (size_t rank = 0; rank < scored.size() && rank < 2; ++rank) {
            std::string text = evidences[scored[rank].second];
            // Vary the presentation so replay exercises every resolution
            // path: verbatim, case/punctuation drift, and a tiny edit.
            size_t idx = scored[rank].second;
            if (idx % 5 == 1) {
                text = casefold(text);
                if (!text.empty() && text.back() == '.') text.pop_back();
            } else if (idx % 5 == 3) {
                size_t the = text.find(" the ");
                if (the != std::string::npos && text.size() > 40) {
                    text = text.substr(0, the) + " " + text.substr(the + 5);
                }
            }
            out.push_back(text);
        }
        return out.dump();
    }
};

TaskRecord make_record(const std::string& id, Granularity granularity, const std::string& question,
                       const std::vector<std::string>& answer_sentences,
                       const std::vector<std::string>& evidence_sentences,
                       const std::vector<std::pair<int, std::set<int>>>& gold_per_part,
                       const std::set<int>& gold_whole = {}) {
    TaskRecord record;
    record.id = id;
    record.granularity = granularity;
    record.dataset_tag = granularity == Granularity::per_sentence ? "fixture_sent" : "fixture_ans";
    record.question = Question(id, question);
    int index = 0;
    for (const auto& s : answer_sentences) record.answer_parts.emplace_back(index++, s);
    index = 0;
    for (const auto& s : evidence_sentences) record.evidence.emplace_back(index++, s);
    if (granularity == Granularity::per_sentence) {
        for (const auto& [part, indices] : gold_per_part) {
            record.gold.push_back(GoldEntry{UnitKey::part(part), indices});
        }
    } else {
        record.gold.push_back(GoldEntry{UnitKey::whole_answer(), gold_whole});
    }
    auto violations = validate_record(record);
    if (!violations.empty()) {
        throw std::runtime_error("fixture record " + id + " invalid: " + join(violations, "; "));
    }
    return record;
}

std::vector<TaskRecord> build_fixture_records() {
    std::vector<TaskRecord> records;

    records.push_back(make_record(
        "sent-cast-iron", Granularity::per_sentence, "paint cast iron",
        {"Are you looking for information on how to paint cast iron?",
         "If so, I found a helpful article on wikiHow that provides a step-by-step guide on how "
         "to paint cast iron.",
         "The process involves prepping the cast iron by cleaning it and removing any rust or "
         "old paint.",
         "Then, you can prime and paint the cast iron using an oil-based primer and paint.",
         "Would you like more information on this topic?"},
        {"Read on for our complete guide to painting cast iron easily at home.",
         "Clean the cast iron thoroughly before you begin.",
         "Remove any rust or old paint with a wire brush.",
         "If you're working with a smaller piece of cast iron, you can wipe it down with a damp "
         "rag, instead.",
         "Coat the cast iron with oil-based primer.",
         "Priming the metal creates a smooth surface and will help the paint adhere.",
         "Apply oil-based paint to the cast iron.",
         "Let each coat dry for at least two hours.",
         "You can find cast iron paint at most hardware stores.",
         "Painted cast iron can last for decades when sealed properly."},
        {{0, {}}, {1, {}}, {2, {1, 2}}, {3, {4, 5, 6}}, {4, {}}}));

    records.push_back(make_record(
        "sent-downstream-tasks", Granularity::per_sentence,
        "Which downstream tasks are used for evaluation in this paper?",
        {"Various sequence tagging tasks are evaluated, including argument detection and CoNLL "
         "chunking.",
         "They also evaluate GENIA bio-entity recognition and WNUT named entity recognition."},
        {"We trained this architecture for the following datasets: Arguments: Argument component "
         "detection (major claim, claim, premise) in 402 persuasive essays BIBREF7.",
         "ACE Entities/Events: ACE 2005 dataset BIBREF8 consists of 599 annotated documents from "
         "six different domains.",
         "Chunking: CoNLL 2000 shared task dataset on chunking.",
         "NER: CoNLL 2003 shared task on named entity recognition.",
         "GENIA NER: The Bio-Entity Recognition Task at JNLPBA BIBREF9 annotated Medline "
         "abstracts with information on bio-entities (like protein or DNA-names).",
         "WNUT16: WNUT16 was a shared task on Named Entity Recognition over Twitter BIBREF10.",
         "POS: We use the part-of-speech tags from Universal Dependencies v. 1.3 for English "
         "with the provided data splits.",
         "For the models included in AllenNLP, we observed a training speed-up of 19-44%.",
         "Only for the GENIA dataset achieved the learned weighted average a significantly "
         "better performance than using the output of the second layer.",
         "The results for the second experiment are presented in the lower part of Table 1."},
        {{0, {0, 2}}, {1, {4, 5}}}));

    records.push_back(make_record(
        "sent-alex", Granularity::per_sentence, "Who is Alex?",
        {"Alex is an engineer.",
         "Alex joined the robotics team in 2019 and moved to Berlin a year later."},
        {"Alex is an engineer.",
         "Alex studied mechatronics at a technical university.",
         "Alex joined the robotics team in 2019.",
         "A year later Alex moved to Berlin.",
         "The robotics team builds autonomous warehouse robots.",
         "Berlin hosts one of the company's three research labs."},
        {{0, {}}, {1, {2, 3}}}));

    records.push_back(make_record(
        "sent-sourdough", Granularity::per_sentence, "how to keep a sourdough starter alive",
        {"You should feed the starter daily with equal parts flour and water.",
         "Keep the jar at room temperature away from direct sunlight.",
         "Happy baking!"},
        {"A sourdough starter needs regular feeding to stay active.",
         "Feed the starter once a day with equal parts flour and water by weight.",
         "Discard half of the starter before each feeding.",
         "Store the jar at room temperature, around 21 degrees Celsius.",
         "Direct sunlight can overheat the culture and kill the yeast.",
         "A healthy starter doubles in volume within six hours of feeding.",
         "You can refrigerate a starter to slow fermentation during long breaks.",
         "White spots of mold mean the starter must be thrown away."},
        {{0, {1}}, {1, {3, 4}}, {2, {}}}));

    records.push_back(make_record(
        "sent-bike-chain", Granularity::per_sentence, "clean a bicycle chain",
        {"Use a degreaser and scrub the chain with a stiff brush.",
         "Afterwards, dry the chain and apply fresh lubricant to every link.",
         "You can find chain cleaning kits online."},
        {"Start by shifting the chain onto the smallest chainring.",
         "Apply a bicycle-specific degreaser along the whole chain.",
         "Scrub the links with a stiff-bristled brush until the grime lifts.",
         "Rinse the chain with a light stream of water.",
         "Dry the chain completely with a clean rag.",
         "Apply one drop of lubricant to each link while turning the cranks.",
         "Wipe off the excess lubricant so it does not attract dust.",
         "A well-lubricated chain lasts roughly three thousand kilometers.",
         "Chain cleaning kits are sold at any bike shop."},
        {{0, {1, 2}}, {1, {4, 5}}, {2, {}}}));

    records.push_back(make_record(
        "sent-mars", Granularity::per_sentence, "Why does Mars appear red?",
        {"Mars appears red because iron minerals on its surface oxidize into rust.",
         "The thin atmosphere also scatters the dust, which tints the sky."},
        {"The surface of Mars is covered with fine dust rich in iron oxides.",
         "Iron minerals in the Martian soil oxidize, forming rust-colored compounds.",
         "Oxidized iron gives the planet its characteristic reddish hue.",
         "The Martian atmosphere is about one percent as dense as Earth's.",
         "Winds loft the oxidized dust high into the thin atmosphere.",
         "Suspended dust scatters sunlight and tints the Martian sky butterscotch.",
         "Mars hosts the tallest volcano in the solar system, Olympus Mons.",
         "A Martian day lasts about twenty-four hours and thirty-seven minutes."},
        {{0, {1, 2}}, {1, {4, 5}}}));

    records.push_back(make_record(
        "sent-tea", Granularity::per_sentence, "brew green tea without bitterness",
        {"Heat the water to about 75 degrees and steep the leaves for two minutes.",
         "This is a question many tea drinkers ask."},
        {"Green tea turns bitter when brewed with boiling water.",
         "Heat the water to roughly 75 degrees Celsius before pouring.",
         "Steep the leaves for no more than two minutes.",
         "Use about two grams of leaves per hundred milliliters of water.",
         "High-quality leaves can be steeped two or three times.",
         "Bitterness comes from tannins released at high temperature."},
        {{0, {1, 2}}, {1, {}}}));

    // Per-answer records (whole-answer gold, research-paper flavored).
    records.push_back(make_record(
        "ans-baselines", Granularity::per_answer, "What baselines are compared in the paper?",
        {"The paper compares a logistic regression baseline and a bidirectional LSTM tagger."},
        {"We introduce a span-based neural model for nested entity mentions.",
         "Our experiments compare against two baselines.",
         "The first baseline is a logistic regression classifier over hand-crafted features.",
         "The second baseline is a bidirectional LSTM tagger with a CRF decoding layer.",
         "All models share the same pretrained word embeddings.",
         "We tune hyperparameters on the development split.",
         "The span-based model outperforms both baselines on every dataset.",
         "Error analysis shows the LSTM struggles with mentions longer than six tokens."},
        {}, {2, 3}));

    records.push_back(make_record(
        "ans-datasets", Granularity::per_answer, "Which corpora are used for training?",
        {"Training uses the news corpus and the biomedical abstracts collection.",
         "Both corpora are tokenized with the same pipeline."},
        {"We train on two corpora of different genres.",
         "The news corpus contains 1.2 million sentences from online newswire.",
         "The biomedical collection consists of 800 thousand abstracts from PubMed.",
         "Both corpora are tokenized and sentence-split with the same preprocessing pipeline.",
         "We hold out five percent of each corpus for validation.",
         "Statistics for both corpora appear in Table 2.",
         "The vocabulary is capped at one hundred thousand types."},
        {}, {1, 2, 3}));

    records.push_back(make_record(
        "ans-metric", Granularity::per_answer, "What evaluation metric is reported?",
        {"The paper reports span-level F1 averaged over five runs."},
        {"Following prior work, we evaluate with span-level precision, recall and F1.",
         "A predicted span counts as correct only when both boundaries match the gold span.",
         "We report the mean F1 over five runs with different random seeds.",
         "Standard deviations are shown in parentheses.",
         "We additionally report inference speed in sentences per second.",
         "The evaluation script is released with the code."},
        {}, {0, 2}));

    records.push_back(make_record(
        "ans-annotators", Granularity::per_answer, "How many annotators labeled the corpus?",
        {"Three trained annotators labeled the corpus.", "Disagreements were adjudicated by a fourth expert."},
        {"The corpus was annotated over a period of four months.",
         "Three trained annotators labeled every document independently.",
         "Inter-annotator agreement reached a Cohen's kappa of 0.81.",
         "Disagreements were adjudicated by a fourth senior annotator.",
         "Annotation guidelines are included in the appendix.",
         "Each annotator completed a two-week training phase before production labeling."},
        {}, {1, 3}));

    records.push_back(make_record(
        "ans-embeddings", Granularity::per_answer, "What embedding model initializes the encoder?",
        {"The encoder is initialized with 300-dimensional pretrained word vectors."},
        {"Our encoder is a two-layer transformer with relative position encodings.",
         "We initialize the embedding layer with 300-dimensional pretrained word vectors.",
         "The vectors were trained on a web-scale corpus with a skip-gram objective.",
         "Out-of-vocabulary words receive randomly initialized vectors.",
         "Embeddings are fine-tuned together with the rest of the network.",
         "Freezing the embeddings costs about one point of F1."},
        {}, {1}));

    records.push_back(make_record(
        "sent-quote", Granularity::per_sentence, "What did the mayor announce?",
        {"The mayor announced a new tram line and promised cheaper tickets.",
         "The plan was described as 'ambitious' by the local press."},
        {"On Monday the mayor announced a new tram line through the old town.",
         "The mayor also promised cheaper tickets for students and seniors.",
         "Construction is scheduled to start next spring.",
         "The local press described the plan as 'ambitious'.",
         "Opposition councillors questioned the financing of the project.",
         "The tram network was last extended fifteen years ago."},
        {{0, {0, 1}}, {1, {3}}}));

    return records;
}

struct RunSpec {
    std::string strategy;
    std::string attributor;
    std::string name() const { return strategy + "+" + attributor; }
};

PipelineConfig make_config(const RunSpec& spec, const fs::path& records, const fs::path& cache,
                           const fs::path& out_dir, const std::string& mode) {
    PipelineConfig config;
    config.records_path = records.string();
    config.output_dir = out_dir.string();
    config.strategy = spec.strategy;
    config.attributor = spec.attributor;
    config.cache_dir = cache.string();
    config.llm_mode = mode;
    config.llm_model = "fixture-model";
    config.llm_endpoint = "http://fixture.invalid/v1/chat";
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attrkit fixture generator"};
    std::string fixtures_dir = "fixtures";
    app.add_option("--fixtures", fixtures_dir, "fixture output directory");
    CLI11_PARSE(app, argc, argv);

    try {
        fs::path root(fixtures_dir);
        fs::create_directories(root);
        fs::path cache = root / "cache";
        fs::remove_all(cache);
        fs::create_directories(cache);

        std::vector<TaskRecord> records = build_fixture_records();
        fs::path records_path = root / "records.jsonl";
        save_records_jsonl(records, records_path);
        std::cout << "wrote " << records.size() << " records to " << records_path << "\n";

        std::vector<RunSpec> runs;
        for (const std::string& strategy : {"nil", "factscore", "cog", "cog_no_neg"}) {
            for (const std::string& attributor : {"bm25", "llm"}) {
                runs.push_back(RunSpec{strategy, attributor});
            }
        }

        fs::path work = fs::temp_directory_path() / "attrkit-fixturegen";
        fs::remove_all(work);

        auto scripted = std::make_shared<ScriptedTransport>();
        for (const auto& spec : runs) {
            PipelineConfig config =
                make_config(spec, records_path, cache, work / "record" / spec.name(), "record");
            run_pipeline(config, scripted);
        }
        std::cout << "recorded cache entries: "
                  << std::distance(fs::directory_iterator(cache), fs::directory_iterator{}) << "\n";

        json golden = json::object();
        for (const auto& spec : runs) {
            PipelineConfig config =
                make_config(spec, records_path, cache, work / "replay" / spec.name(), "replay");
            RunManifest manifest = run_pipeline(config, nullptr);
            json hashes = json::object();
            for (const auto& [file, hash] : manifest.stage_output_hashes) hashes[file] = hash;
            golden[spec.name()] = std::move(hashes);
        }
        write_text_file_atomic(root / "golden.json", golden.dump(2) + "\n");
        std::cout << "wrote golden hashes for " << runs.size() << " runs\n";
        fs::remove_all(work);
    } catch (const std::exception& e) {
        std::cerr << "fixturegen failed: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
