#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace comedia {

// Literal forms of the reserved tokens. Masking writes NAME/MASK into text;
// the tokenizer reserves ids 0..3 for these in this order.
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kNameToken = "[NAME]";
inline constexpr std::string_view kMaskToken = "[MASK]";

bool is_special_literal(std::string_view word);

std::string nfc(std::string_view text);

/// Collapses every run of Unicode whitespace to one ASCII space and trims.
std::string normalize_whitespace(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);
std::size_t count_words(std::string_view text);

/// Splits text into words with each punctuation code point as its own token.
/// Special literals such as "[NAME]" survive intact.
std::vector<std::string> detach_punctuation(std::string_view text);

bool is_punctuation_token(std::string_view token);

std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

std::string to_lower(std::string_view text);
std::string to_upper(std::string_view text);

/// "ROSAURA" -> "Rosaura", "DON JUAN" -> "Don Juan".
std::string capitalize_words(std::string_view text);

/// One string per code point; malformed bytes come back as U+FFFD.
std::vector<std::string> utf8_code_points(std::string_view text);

std::string sha256_hex(std::string_view data);

std::string html_escape(std::string_view text);

}  // namespace comedia
