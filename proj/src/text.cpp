#include "comedia/text.hpp"

#include <openssl/evp.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/locid.h>
#include <unicode/utf8.h>

#include <array>
#include <memory>
#include <stdexcept>

namespace comedia {
namespace {

struct CodePoint {
    UChar32 value;
    std::size_t begin;
    std::size_t end;
};

std::vector<CodePoint> decode(std::string_view text) {
    std::vector<CodePoint> out;
    out.reserve(text.size());
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        const int32_t start = i;
        UChar32 c = 0;
        U8_NEXT(bytes, i, length, c);
        if (c < 0) c = 0xFFFD;
        out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
    }
    return out;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

bool is_punct(UChar32 c) { return u_ispunct(c) != 0; }

std::string encode(UChar32 c) {
    std::array<uint8_t, 4> buf{};
    int32_t n = 0;
    UBool error = false;
    U8_APPEND(buf.data(), n, 4, c, error);
    if (error) return "\xEF\xBF\xBD";
    return std::string(reinterpret_cast<const char*>(buf.data()), static_cast<std::size_t>(n));
}

std::string to_utf8(const icu::UnicodeString& s) {
    std::string out;
    s.toUTF8String(out);
    return out;
}

}  // namespace

bool is_special_literal(std::string_view word) {
    return word == kPadToken || word == kUnkToken || word == kNameToken || word == kMaskToken;
}

std::string nfc(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) return std::string(text);
    auto source = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    icu::UnicodeString result = normalizer->normalize(source, status);
    if (U_FAILURE(status)) return std::string(text);
    return to_utf8(result);
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (const auto& cp : decode(text)) {
        if (is_space(cp.value)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.append(text.substr(cp.begin, cp.end - cp.begin));
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (const auto& cp : decode(text)) {
        if (is_space(cp.value)) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else {
            current.append(text.substr(cp.begin, cp.end - cp.begin));
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

std::size_t count_words(std::string_view text) { return split_whitespace(text).size(); }

std::vector<std::string> detach_punctuation(std::string_view text) {
    std::vector<std::string> tokens;
    for (const auto& word : split_whitespace(text)) {
        std::string_view rest = word;
        std::string current;
        const auto points = decode(rest);
        std::size_t i = 0;
        while (i < points.size()) {
            if (points[i].value == '[') {
                // A special literal embedded in punctuation, e.g. "([NAME])".
                bool matched = false;
                for (auto special : {kPadToken, kUnkToken, kNameToken, kMaskToken}) {
                    if (rest.substr(points[i].begin, special.size()) == special) {
                        if (!current.empty()) tokens.push_back(std::move(current));
                        current.clear();
                        tokens.emplace_back(special);
                        const std::size_t stop = points[i].begin + special.size();
                        while (i < points.size() && points[i].begin < stop) ++i;
                        matched = true;
                        break;
                    }
                }
                if (matched) continue;
            }
            const auto& cp = points[i];
            if (is_punct(cp.value)) {
                if (!current.empty()) tokens.push_back(std::move(current));
                current.clear();
                tokens.emplace_back(rest.substr(cp.begin, cp.end - cp.begin));
            } else {
                current.append(rest.substr(cp.begin, cp.end - cp.begin));
            }
            ++i;
        }
        if (!current.empty()) tokens.push_back(std::move(current));
    }
    return tokens;
}

bool is_punctuation_token(std::string_view token) {
    if (token.empty()) return false;
    for (const auto& cp : decode(token)) {
        if (!is_punct(cp.value)) return false;
    }
    return true;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::string to_lower(std::string_view text) {
    auto s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    s.toLower(icu::Locale("es"));
    return to_utf8(s);
}

std::string to_upper(std::string_view text) {
    auto s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    s.toUpper(icu::Locale("es"));
    return to_utf8(s);
}

std::string capitalize_words(std::string_view text) {
    std::string out;
    bool word_start = true;
    for (const auto& cp : decode(text)) {
        if (is_space(cp.value) || is_punct(cp.value)) {
            out.append(text.substr(cp.begin, cp.end - cp.begin));
            word_start = true;
            continue;
        }
        out.append(encode(word_start ? u_toupper(cp.value) : u_tolower(cp.value)));
        word_start = false;
    }
    return out;
}

std::vector<std::string> utf8_code_points(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& cp : decode(text)) {
        if (cp.value == 0xFFFD && text.substr(cp.begin, cp.end - cp.begin) != "\xEF\xBF\xBD")
            out.emplace_back("\xEF\xBF\xBD");
        else
            out.emplace_back(text.substr(cp.begin, cp.end - cp.begin));
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string html_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace comedia
