#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tagmt::unicode {

/// Decodes UTF-8. Throws std::invalid_argument on malformed input.
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);
void append_utf8(std::string& out, char32_t cp);

/// Number of Unicode scalar values in a UTF-8 string.
std::size_t length(std::string_view text);

// Character classes. Whitespace follows Python's str.isspace(); the BLEU
// punctuation and symbol classes reproduce the reference tokenizer exactly.
bool is_space(char32_t cp);
bool is_letter(char32_t cp);
bool is_decimal(char32_t cp);
bool is_bleu_punct(char32_t cp);
bool is_bleu_symbol(char32_t cp);
char32_t to_lower(char32_t cp);

std::string to_lower(std::string_view text);

/// Splits on runs of Unicode whitespace, dropping empty fields.
std::vector<std::string_view> split_whitespace(std::string_view text);
std::size_t count_tokens(std::string_view text);

/// Removes leading and trailing Unicode whitespace.
std::string_view trim(std::string_view text);
std::string_view rtrim(std::string_view text);

bool contains_letter(std::string_view text);

}  // namespace tagmt::unicode
