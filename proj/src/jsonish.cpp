#include "attrkit/jsonish.hpp"

#include <sstream>

namespace attrkit {

using nlohmann::ordered_json;

std::string strip_code_fences(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        size_t first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line.compare(first, 3, "```") == 0) continue;
        out += line;
        out += '\n';
    }
    return out;
}

std::optional<std::string> extract_balanced(std::string_view text, char open, char close) {
    size_t start = text.find(open);
    if (start == std::string_view::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    char quote = 0;
    for (size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                in_string = false;
            }
            continue;
        }
        if (c == '"' || c == '\'') {
            in_string = true;
            quote = c;
        } else if (c == open) {
            ++depth;
        } else if (c == close) {
            --depth;
            if (depth == 0) return std::string(text.substr(start, i - start + 1));
        }
    }
    return std::nullopt;
}

namespace {

std::optional<ordered_json> try_parse(const std::string& text) {
    ordered_json parsed = ordered_json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) return std::nullopt;
    return parsed;
}

std::string remove_trailing_commas(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    char quote = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            out.push_back(c);
            if (c == '\\' && i + 1 < text.size()) {
                out.push_back(text[++i]);
            } else if (c == quote) {
                in_string = false;
            }
            continue;
        }
        if (c == '"' || c == '\'') {
            in_string = true;
            quote = c;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            size_t j = i + 1;
            while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
            if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;  // drop it
        }
        out.push_back(c);
    }
    return out;
}

// Last-resort pythonic repair: swap quoting characters wholesale. Breaks on
// apostrophes inside values, which is why it runs only after strict parsing
// has already failed.
std::string swap_quotes(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        if (c == '\'') c = '"';
    }
    return out;
}

}  // namespace

std::optional<ordered_json> parse_lenient(std::string_view text) {
    std::string candidate(text);
    if (auto parsed = try_parse(candidate)) return parsed;
    candidate = remove_trailing_commas(candidate);
    if (auto parsed = try_parse(candidate)) return parsed;
    candidate = swap_quotes(candidate);
    if (auto parsed = try_parse(candidate)) return parsed;
    return std::nullopt;
}

}  // namespace attrkit
