#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace attrkit {

/// Canonical NFC form of a UTF-8 string. All core text fields pass through
/// this at construction so downstream string identity checks see one form.
std::string nfc(std::string_view utf8);

/// Unicode case folding (full, locale-independent).
std::string casefold(std::string_view utf8);

/// Collapse internal whitespace runs to a single space and trim both ends.
std::string collapse_whitespace(std::string_view text);

std::string trim(std::string_view text);

/// Normalization used when resolving LLM-returned evidence strings:
/// casefold + collapse whitespace + strip terminal punctuation (. ! ? , ; :).
std::string normalize_for_match(std::string_view utf8);

/// Normalization used by the exact-match exclusion rule: NFC + casefold +
/// collapse internal whitespace + trim. Punctuation is kept.
std::string normalize_for_exclusion(std::string_view utf8);

/// Levenshtein similarity in [0,1] over Unicode code points:
/// 1 - distance / max(|a|, |b|). Two empty strings compare as 1.
double levenshtein_similarity(std::string_view a, std::string_view b);

std::string sha256_hex(std::string_view data);

/// Round half-to-even at the given number of decimal digits.
double round_half_even(double value, int digits);

/// BM25 tokenization: split on non-alphanumeric code points, casefold,
/// drop empties. Alphanumeric per Unicode properties.
std::vector<std::string> tokenize(std::string_view utf8);

std::vector<uint32_t> decode_utf8(std::string_view utf8);

std::string read_text_file(const std::filesystem::path& path);

/// Write via temp file + rename so readers never observe a partial file.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace attrkit
