#include "tagmt/unicode.hpp"

#include <algorithm>
#include <stdexcept>

namespace tagmt::unicode {
namespace {

struct CodepointRange {
  char32_t lo;
  char32_t hi;
};

struct CodepointMapping {
  char32_t from;
  char32_t to;
};

#include "unicode_tables.inc"

template <std::size_t N>
bool in_ranges(const CodepointRange (&table)[N], char32_t cp) {
  auto it = std::upper_bound(std::begin(table), std::end(table), cp,
                             [](char32_t c, const CodepointRange& r) { return c < r.lo; });
  if (it == std::begin(table)) return false;
  --it;
  return cp <= it->hi;
}

// Decodes one scalar starting at text[i]; advances i. Throws on malformed input.
char32_t next_scalar(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
    min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
    min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
    min = 0x10000;
  } else {
    throw std::invalid_argument("invalid UTF-8 lead byte at offset " + std::to_string(i));
  }
  if (i + extra >= text.size()) {
    throw std::invalid_argument("truncated UTF-8 sequence at offset " + std::to_string(i));
  }
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      throw std::invalid_argument("invalid UTF-8 continuation at offset " + std::to_string(i + k));
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    throw std::invalid_argument("invalid UTF-8 scalar at offset " + std::to_string(i));
  }
  i += extra + 1;
  return cp;
}

}  // namespace

std::u32string decode(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) out.push_back(next_scalar(text, i));
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
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
}

std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) append_utf8(out, cp);
  return out;
}

std::size_t length(std::string_view text) {
  std::size_t n = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    next_scalar(text, i);
    ++n;
  }
  return n;
}

bool is_space(char32_t cp) {
  if (cp < 0x80) return (cp >= 0x09 && cp <= 0x0D) || (cp >= 0x1C && cp <= 0x20);
  return in_ranges(kSpaceRanges, cp);
}
bool is_letter(char32_t cp) { return in_ranges(kLetterRanges, cp); }
bool is_decimal(char32_t cp) { return in_ranges(kDecimalRanges, cp); }
bool is_bleu_punct(char32_t cp) { return in_ranges(kBleuPunctRanges, cp); }
bool is_bleu_symbol(char32_t cp) { return in_ranges(kBleuSymbolRanges, cp); }

char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  auto it = std::lower_bound(std::begin(kLowerMap), std::end(kLowerMap), cp,
                             [](const CodepointMapping& m, char32_t c) { return m.from < c; });
  return (it != std::end(kLowerMap) && it->from == cp) ? it->to : cp;
}

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) append_utf8(out, to_lower(next_scalar(text, i)));
  return out;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  while (i < text.size()) {
    const std::size_t at = i;
    const char32_t cp = next_scalar(text, i);
    if (is_space(cp)) {
      if (start != std::string_view::npos) {
        out.push_back(text.substr(start, at - start));
        start = std::string_view::npos;
      }
    } else if (start == std::string_view::npos) {
      start = at;
    }
  }
  if (start != std::string_view::npos) out.push_back(text.substr(start));
  return out;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const bool space = is_space(next_scalar(text, i));
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

std::string_view rtrim(std::string_view text) {
  std::size_t end = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_scalar(text, i);
    if (!is_space(cp)) end = i;
  }
  return text.substr(0, end);
}

std::string_view trim(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t at = i;
    if (!is_space(next_scalar(text, i))) {
      text.remove_prefix(at);
      return rtrim(text);
    }
  }
  return {};
}

bool contains_letter(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_letter(next_scalar(text, i))) return true;
  }
  return false;
}

}  // namespace tagmt::unicode
