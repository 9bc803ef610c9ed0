#include "attrkit/util.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace attrkit;

TEST_SUITE("util") {

TEST_CASE("nfc composes and reorders combining sequences") {
    // Frozen against a reference Unicode implementation.
    CHECK(nfc("e\xCC\x81") == "\xC3\xA9");                     // e + U+0301 -> U+00E9
    CHECK(nfc("\xE2\x84\xAB") == "\xC3\x85");                  // U+212B angstrom -> U+00C5
    CHECK(nfc("\xE1\x84\x80\xE1\x85\xA1\xE1\x86\xA8") == "\xEA\xB0\x81");  // Hangul jamo -> U+AC01
    // a + U+0316 + U+0301: non-adjacent composition across a lower mark
    CHECK(nfc("a\xCC\x96\xCC\x81") == "\xC3\xA1\xCC\x96");
    // q + U+0307 + U+0323: pure canonical reordering, no composition
    CHECK(nfc("q\xCC\x87\xCC\xA3") == "q\xCC\xA3\xCC\x87");
    CHECK(nfc("plain ascii stays put") == "plain ascii stays put");
    CHECK(nfc("") == "");
}

TEST_CASE("nfc is idempotent") {
    for (const char* s : {"e\xCC\x81", "caf\xC3\xA9", "\xE2\x84\xAB b", "q\xCC\x87\xCC\xA3"}) {
        CHECK(nfc(nfc(s)) == nfc(s));
    }
}

TEST_CASE("casefold") {
    CHECK(casefold("HeLLo") == "hello");
    CHECK(casefold("GRO\xC3\x9F") == "gross");  // U+00DF folds to ss
}

TEST_CASE("whitespace handling") {
    CHECK(collapse_whitespace("  a\t\tb \n c  ") == "a b c");
    CHECK(collapse_whitespace("") == "");
    CHECK(trim("  x  ") == "x");
    CHECK(trim("\n\t") == "");
}

TEST_CASE("normalize_for_match strips terminal punctuation and folds") {
    CHECK(normalize_for_match("The Cat Sat.") == "the cat sat");
    CHECK(normalize_for_match("  Hello,   World!!  ") == "hello, world");
    CHECK(normalize_for_match("done?!;") == "done");
}

TEST_CASE("normalize_for_exclusion keeps punctuation") {
    CHECK(normalize_for_exclusion("The  Cat Sat.") == "the cat sat.");
    CHECK(normalize_for_exclusion("A B") == normalize_for_exclusion("a   b"));
    CHECK(normalize_for_exclusion("ends.") != normalize_for_exclusion("ends"));
}

TEST_CASE("levenshtein similarity") {
    CHECK(levenshtein_similarity("kitten", "sitting") == doctest::Approx(1.0 - 3.0 / 7.0));
    CHECK(levenshtein_similarity("same", "same") == 1.0);
    CHECK(levenshtein_similarity("", "") == 1.0);
    CHECK(levenshtein_similarity("abc", "") == 0.0);
    // multi-byte code points count as single edits
    CHECK(levenshtein_similarity("caf\xC3\xA9", "cafe") == doctest::Approx(0.75));
}

TEST_CASE("sha256 matches reference vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("round_half_even") {
    CHECK(round_half_even(0.58785, 4) == doctest::Approx(0.5878).epsilon(1e-12));
    CHECK(round_half_even(0.12345, 4) == doctest::Approx(0.1234).epsilon(1e-12));  // ties to even
    CHECK(round_half_even(0.12355, 4) == doctest::Approx(0.1236).epsilon(1e-12));
    CHECK(round_half_even(1.0, 4) == 1.0);
    CHECK(round_half_even(-0.00005, 4) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
    CHECK(tokenize("The cat, the CAT!") == std::vector<std::string>{"the", "cat", "the", "cat"});
    CHECK(tokenize("oil-based primer") == std::vector<std::string>{"oil", "based", "primer"});
    CHECK(tokenize("...") == std::vector<std::string>{});
    CHECK(tokenize("x1 2y") == std::vector<std::string>{"x1", "2y"});
}

TEST_CASE("atomic file writes replace whole files") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "attrkit-util-test";
    fs::create_directories(dir);
    fs::path target = dir / "out.txt";
    write_text_file_atomic(target, "first");
    write_text_file_atomic(target, "second");
    CHECK(read_text_file(target) == "second");
    // no stray temp files left behind
    size_t count = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        (void)entry;
        ++count;
    }
    CHECK(count == 1);
    fs::remove_all(dir);
}

TEST_CASE("join") {
    CHECK(join({"a", "b", "c"}, ", ") == "a, b, c");
    CHECK(join({}, ", ") == "");
}

}  // TEST_SUITE
