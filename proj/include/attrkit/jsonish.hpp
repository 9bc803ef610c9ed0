#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace attrkit {

// Lenient parsing for JSON-shaped LLM output. Repair ladder, in order:
// strict parse, then strip trailing commas, then swap single quotes for
// double quotes. Returns insertion-ordered JSON so unit order survives.

std::string strip_code_fences(std::string_view text);

/// First balanced {...} or [...] block, quote-aware. nullopt when absent.
std::optional<std::string> extract_balanced(std::string_view text, char open, char close);

/// nullopt when every repair attempt fails.
std::optional<nlohmann::ordered_json> parse_lenient(std::string_view text);

}  // namespace attrkit
