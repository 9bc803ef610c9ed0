#include "attrkit/text.hpp"

#include "attrkit/util.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace attrkit {

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_closing(char c) {
    return c == '"' || c == '\'' || c == ')' || c == ']';
}

// Dotted abbreviations that must not terminate a sentence. Single capital
// initials are deliberately absent ("A. B?" splits).
const std::unordered_set<std::string>& abbreviations() {
    static const std::unordered_set<std::string> set = {
        "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc",
        "e.g", "i.e", "cf", "ca", "al", "fig", "vol", "approx", "dept",
        "univ", "inc", "ltd", "co", "corp",
    };
    return set;
}

// The dotted unit preceding position `dot` ("e.g" for "e.g.", "Dr" for "Dr.").
std::string dotted_unit_before(std::string_view text, size_t dot) {
    size_t begin = dot;
    while (begin > 0) {
        char c = text[begin - 1];
        if (std::isalpha(static_cast<unsigned char>(c)) || (c == '.' && begin - 1 != dot)) {
            --begin;
        } else {
            break;
        }
    }
    std::string unit(text.substr(begin, dot - begin));
    while (!unit.empty() && unit.back() == '.') unit.pop_back();
    std::transform(unit.begin(), unit.end(), unit.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return unit;
}

bool is_word_cp(UChar32 c) { return u_isalnum(c); }

}  // namespace

std::string_view to_string(Pos pos) {
    switch (pos) {
        case Pos::Noun: return "noun";
        case Pos::Pronoun: return "pronoun";
        case Pos::Verb: return "verb";
        case Pos::Article: return "article";
        case Pos::Other: return "other";
    }
    return "other";
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    size_t start = 0;
    size_t i = 0;
    auto flush = [&](size_t end) {
        std::string s = trim(text.substr(start, end - start));
        if (!s.empty()) sentences.push_back(std::move(s));
        start = end;
    };
    while (i < text.size()) {
        char c = text[i];
        if (!is_terminator(c)) {
            ++i;
            continue;
        }
        if (c == '.') {
            // Consume ellipses; only the last dot can terminate.
            while (i + 1 < text.size() && text[i + 1] == '.') ++i;
            if (abbreviations().count(dotted_unit_before(text, i)) > 0) {
                ++i;
                continue;
            }
        } else {
            while (i + 1 < text.size() && is_terminator(text[i + 1])) ++i;
        }
        ++i;
        while (i < text.size() && is_closing(text[i])) ++i;
        // A boundary needs whitespace (or end of text) after the terminator;
        // otherwise the dot is word-internal ("e.g.", "3.5", "A.B.").
        if (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) continue;
        flush(i);
    }
    flush(text.size());
    return sentences;
}

size_t count_sentences(std::string_view text) {
    return split_sentences(text).size();
}

LexiconTagger::LexiconTagger() {
    static const char* kArticles[] = {"a", "an", "the"};
    static const char* kPronouns[] = {
        "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us",
        "them", "my", "your", "his", "its", "our", "their", "mine", "yours",
        "hers", "ours", "theirs", "myself", "yourself", "himself", "herself",
        "itself", "ourselves", "themselves", "this", "that", "these", "those",
        "who", "whom", "whose", "which", "what", "someone", "anyone",
        "everyone", "nobody", "something", "anything", "everything", "nothing",
    };
    static const char* kVerbs[] = {
        "is", "am", "are", "was", "were", "be", "been", "being", "has", "have",
        "had", "do", "does", "did", "will", "would", "shall", "should", "can",
        "could", "may", "might", "must", "went", "go", "goes", "said", "says",
        "made", "make", "makes",
    };
    static const char* kOther[] = {
        // prepositions
        "of", "in", "on", "at", "by", "for", "with", "from", "to", "into",
        "onto", "over", "under", "about", "after", "before", "between",
        "during", "through", "against", "among", "around", "without", "within",
        "upon", "across", "behind", "below", "beneath", "beside", "near",
        "off", "since", "toward", "towards", "until", "via", "as",
        // conjunctions
        "and", "or", "but", "nor", "so", "yet", "because", "although",
        "though", "while", "if", "unless", "whereas", "whether", "when",
        "where", "how", "why", "then", "than",
        // common adverbs / negation
        "not", "no", "very", "too", "also", "quite", "rather", "always",
        "never", "often", "here", "there", "now", "just", "only", "more",
        "most", "less", "least",
    };
    for (const char* w : kArticles) add_entry(w, Pos::Article);
    for (const char* w : kPronouns) add_entry(w, Pos::Pronoun);
    for (const char* w : kVerbs) add_entry(w, Pos::Verb);
    for (const char* w : kOther) add_entry(w, Pos::Other);
}

void LexiconTagger::add_entry(std::string_view token, Pos tag) {
    entries_.emplace_back(casefold(token), tag);
    sorted_ = false;
}

void LexiconTagger::sort_entries() {
    std::sort(entries_.begin(), entries_.end());
    entries_.erase(std::unique(entries_.begin(), entries_.end(),
                               [](const auto& a, const auto& b) { return a.first == b.first; }),
                   entries_.end());
    sorted_ = true;
}

void LexiconTagger::load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw TaggingError("cannot open lexicon file: " + path.string());
    }
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || line[0] == '#') continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw TaggingError("lexicon line " + std::to_string(lineno) + " lacks a tab separator");
        }
        std::string token = trim(line.substr(0, tab));
        std::string tag_name = casefold(trim(line.substr(tab + 1)));
        Pos tag;
        if (tag_name == "noun") tag = Pos::Noun;
        else if (tag_name == "pronoun") tag = Pos::Pronoun;
        else if (tag_name == "verb") tag = Pos::Verb;
        else if (tag_name == "article") tag = Pos::Article;
        else if (tag_name == "other") tag = Pos::Other;
        else throw TaggingError("lexicon line " + std::to_string(lineno) + ": unknown tag '" + tag_name + "'");
        add_entry(token, tag);
    }
}

std::vector<Pos> LexiconTagger::tag_tokens(const std::vector<std::string>& tokens) const {
    if (!sorted_) {
        const_cast<LexiconTagger*>(this)->sort_entries();
    }
    std::vector<Pos> tags;
    tags.reserve(tokens.size());
    for (const auto& raw : tokens) {
        std::string tok = casefold(raw);
        auto it = std::lower_bound(entries_.begin(), entries_.end(), tok,
                                   [](const auto& e, const std::string& t) { return e.first < t; });
        if (it != entries_.end() && it->first == tok) {
            tags.push_back(it->second);
            continue;
        }
        auto ends_with = [&](std::string_view suffix) {
            return tok.size() > suffix.size() + 1 &&
                   tok.compare(tok.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        if (ends_with("ly")) {
            tags.push_back(Pos::Other);
        } else if (ends_with("ize") || ends_with("izes") || ends_with("ized") || ends_with("izing") ||
                   ends_with("ise") || ends_with("ises") || ends_with("ised") || ends_with("ising") ||
                   ends_with("ify") || ends_with("ifies") || ends_with("ified") || ends_with("ifying")) {
            tags.push_back(Pos::Verb);
        } else {
            tags.push_back(Pos::Noun);
        }
    }
    return tags;
}

Pos collapse_ptb_label(std::string_view label) {
    if (label.starts_with("NN")) return Pos::Noun;
    if (label.starts_with("PRP") || label.starts_with("WP")) return Pos::Pronoun;
    if (label.starts_with("VB") || label == "MD") return Pos::Verb;
    if (label == "DT") return Pos::Article;
    return Pos::Other;
}

TaggedSentence tag(std::string_view sentence, const TaggerBackend& tagger) {
    if (trim(sentence).empty()) {
        throw TaggingError("cannot tag an empty sentence");
    }
    TaggedSentence result;
    result.text = std::string(sentence);

    std::vector<uint32_t> cps = decode_utf8(sentence);
    std::vector<std::string> tokens;
    std::string current;
    auto append_cp = [](std::string& out, uint32_t cp) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    };
    auto flush = [&]() {
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    };
    for (size_t i = 0; i < cps.size(); ++i) {
        uint32_t cp = cps[i];
        if (is_word_cp(static_cast<UChar32>(cp))) {
            append_cp(current, cp);
            continue;
        }
        // Hyphens and apostrophes inside a word stay in the token and are
        // not punctuation ("oil-based", "don't").
        bool joiner = (cp == '-' || cp == '\'' || cp == 0x2019);
        bool flanked = !current.empty() && i + 1 < cps.size() &&
                       is_word_cp(static_cast<UChar32>(cps[i + 1]));
        if (joiner && flanked) {
            append_cp(current, cp);
            continue;
        }
        flush();
        if (u_ispunct(static_cast<UChar32>(cp))) {
            result.punctuation_set.insert(cp);
        }
    }
    flush();

    std::vector<Pos> tags = tagger.tag_tokens(tokens);
    if (tags.size() != tokens.size()) {
        throw TaggingError("tagger returned " + std::to_string(tags.size()) + " tags for " +
                           std::to_string(tokens.size()) + " tokens");
    }
    result.tags.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        result.tags.push_back(PosTag{tags[i], tokens[i]});
    }
    return result;
}

bool is_simple(const TaggedSentence& tagged) {
    for (uint32_t cp : tagged.punctuation_set) {
        if (cp != '.' && cp != '"' && cp != '\'') return false;
    }
    size_t non_nominal = 0;
    bool non_nominal_is_verb = false;
    for (const auto& pt : tagged.tags) {
        if (pt.tag == Pos::Noun || pt.tag == Pos::Pronoun || pt.tag == Pos::Article) continue;
        ++non_nominal;
        non_nominal_is_verb = (pt.tag == Pos::Verb);
        if (non_nominal > 1) return false;
    }
    if (non_nominal == 0) return true;                 // all nominal
    return non_nominal == 1 && non_nominal_is_verb;    // exactly one verb
}

}  // namespace attrkit
