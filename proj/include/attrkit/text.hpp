#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace attrkit {

enum class Pos { Noun, Pronoun, Verb, Article, Other };

std::string_view to_string(Pos pos);

struct PosTag {
    Pos tag = Pos::Other;
    std::string token;
};

struct TaggedSentence {
    std::string text;
    std::vector<PosTag> tags;              // one per token, in token order
    std::set<uint32_t> punctuation_set;    // punctuation code points present
};

struct TaggingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TaggerBackend {
public:
    virtual ~TaggerBackend() = default;
    /// One tag per token. Throws TaggingError on backend failure.
    virtual std::vector<Pos> tag_tokens(const std::vector<std::string>& tokens) const = 0;
};

/// Built-in tagger: closed-class word lists (pronouns, articles, auxiliaries,
/// prepositions, conjunctions) plus suffix heuristics, defaulting to Noun.
/// Ambiguity resolves toward Noun/Other on purpose: the downstream classifier
/// is meant to be high-precision, not a treebank tagger.
class LexiconTagger : public TaggerBackend {
public:
    LexiconTagger();
    /// Extends the built-in lexicon from a UTF-8 file with one
    /// `token<TAB>tag` pair per line (tags: noun pronoun verb article other).
    void load_lexicon(const std::filesystem::path& path);
    void add_entry(std::string_view token, Pos tag);

    std::vector<Pos> tag_tokens(const std::vector<std::string>& tokens) const override;

private:
    std::vector<std::pair<std::string, Pos>> entries_;  // sorted for lookup
    bool sorted_ = false;
    void sort_entries();
};

/// Collapses a Penn-Treebank-style label onto the five-way tagset, for
/// plugging external taggers: NN* -> Noun, PRP*/WP* -> Pronoun,
/// VB*/MD -> Verb, DT -> Article, everything else -> Other.
Pos collapse_ptb_label(std::string_view label);

/// Splits text into sentences at . ! ? (or end of text). A built-in
/// abbreviation list (e.g., "Dr.", "e.g.") suppresses boundaries. Trailing
/// closing quotes/brackets stay with their sentence. Whitespace-only input
/// yields an empty list.
std::vector<std::string> split_sentences(std::string_view text);

size_t count_sentences(std::string_view text);

/// Tokenizes and tags one sentence. Punctuation is excluded from tokens and
/// recorded in punctuation_set; hyphens and apostrophes flanked by
/// alphanumerics stay inside their token and are not counted as punctuation.
TaggedSentence tag(std::string_view sentence, const TaggerBackend& tagger);

/// The simple-sentence rule: true iff the punctuation present is limited to
/// . " ' and the tag multiset is all {Noun, Pronoun, Article} except at most
/// one Verb. Simple sentences skip decomposition.
bool is_simple(const TaggedSentence& tagged);

}  // namespace attrkit
