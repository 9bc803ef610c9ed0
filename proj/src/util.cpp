#include "attrkit/util.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace attrkit {

namespace {

const icu::Normalizer2& nfc_instance() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* inst = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || inst == nullptr) {
        throw std::runtime_error("ICU NFC normalizer unavailable");
    }
    return *inst;
}

bool is_ascii(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

}  // namespace

std::string nfc(std::string_view utf8) {
    if (is_ascii(utf8)) return std::string(utf8);  // ASCII is NFC already
    icu::UnicodeString input = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString normalized = nfc_instance().normalize(input, status);
    if (U_FAILURE(status)) {
        throw std::runtime_error("NFC normalization failed");
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::string casefold(std::string_view utf8) {
    icu::UnicodeString s = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    s.foldCase(U_FOLD_CASE_DEFAULT);
    std::string out;
    s.toUTF8String(out);
    return out;
}

std::string trim(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(c);
    }
    return out;
}

std::string normalize_for_match(std::string_view utf8) {
    std::string s = collapse_whitespace(casefold(nfc(utf8)));
    static constexpr std::string_view kTerminal = ".!?,;:";
    while (!s.empty() && kTerminal.find(s.back()) != std::string_view::npos) {
        s.pop_back();
    }
    return trim(s);
}

std::string normalize_for_exclusion(std::string_view utf8) {
    return collapse_whitespace(casefold(nfc(utf8)));
}

std::vector<uint32_t> decode_utf8(std::string_view utf8) {
    std::vector<uint32_t> cps;
    cps.reserve(utf8.size());
    size_t i = 0;
    while (i < utf8.size()) {
        unsigned char c = static_cast<unsigned char>(utf8[i]);
        uint32_t cp = 0;
        int extra = 0;
        if (c < 0x80) {
            cp = c;
        } else if ((c >> 5) == 0x6) {
            cp = c & 0x1F;
            extra = 1;
        } else if ((c >> 4) == 0xE) {
            cp = c & 0x0F;
            extra = 2;
        } else if ((c >> 3) == 0x1E) {
            cp = c & 0x07;
            extra = 3;
        } else {
            cp = 0xFFFD;  // stray continuation byte
        }
        ++i;
        for (int k = 0; k < extra && i < utf8.size(); ++k, ++i) {
            unsigned char cc = static_cast<unsigned char>(utf8[i]);
            if ((cc >> 6) != 0x2) break;
            cp = (cp << 6) | (cc & 0x3F);
        }
        cps.push_back(cp);
    }
    return cps;
}

double levenshtein_similarity(std::string_view a, std::string_view b) {
    std::vector<uint32_t> ca = decode_utf8(a);
    std::vector<uint32_t> cb = decode_utf8(b);
    if (ca.empty() && cb.empty()) return 1.0;
    const size_t n = ca.size();
    const size_t m = cb.size();
    std::vector<size_t> prev(m + 1);
    std::vector<size_t> cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            size_t sub = prev[j - 1] + (ca[i - 1] == cb[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    double dist = static_cast<double>(prev[m]);
    return 1.0 - dist / static_cast<double>(std::max(n, m));
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

double round_half_even(double value, int digits) {
    if (!std::isfinite(value)) return value;
    double scale = std::pow(10.0, digits);
    double scaled = value * scale;
    double floor_v = std::floor(scaled);
    double frac = scaled - floor_v;
    double rounded;
    if (frac > 0.5) {
        rounded = floor_v + 1.0;
    } else if (frac < 0.5) {
        rounded = floor_v;
    } else {
        rounded = (std::fmod(floor_v, 2.0) == 0.0) ? floor_v : floor_v + 1.0;
    }
    return rounded / scale;
}

std::vector<std::string> tokenize(std::string_view utf8) {
    std::string folded = casefold(nfc(utf8));
    icu::UnicodeString s = icu::UnicodeString::fromUTF8(
        icu::StringPiece(folded.data(), static_cast<int32_t>(folded.size())));
    std::vector<std::string> tokens;
    icu::UnicodeString current;
    for (int32_t i = 0; i < s.length();) {
        UChar32 c = s.char32At(i);
        if (u_isalnum(c)) {
            current.append(c);
        } else if (!current.isEmpty()) {
            std::string tok;
            current.toUTF8String(tok);
            tokens.push_back(std::move(tok));
            current.remove();
        }
        i += U16_LENGTH(c);
    }
    if (!current.isEmpty()) {
        std::string tok;
        current.toUTF8String(tok);
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    static std::atomic<uint64_t> counter{0};
    std::random_device rd;
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), ".tmp.%u.%llu", rd(),
                  static_cast<unsigned long long>(counter.fetch_add(1)));
    fs::path tmp = path;
    tmp += suffix;
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open temp file: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

}  // namespace attrkit
