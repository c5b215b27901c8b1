#include "doctest.h"
#include "tagmt/unicode.hpp"
#include "test_util.hpp"

using namespace tagmt;

TEST_CASE("utf8 decode/encode round trip") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const auto line = testing::random_unicode_line(rng);
    CHECK(unicode::encode(unicode::decode(line)) == line);
  }
  CHECK(unicode::length("héllo \U0001F600") == 7);
}

TEST_CASE("malformed utf8 is rejected") {
  CHECK_THROWS(unicode::decode("\xff"));
  CHECK_THROWS(unicode::decode("\xc3"));
  CHECK_THROWS(unicode::decode("\xed\xa0\x80"));  // surrogate
  CHECK_THROWS(unicode::decode("\xc0\xaf"));      // overlong
}

TEST_CASE("character classes") {
  CHECK(unicode::is_space(U' '));
  CHECK(unicode::is_space(U' '));
  CHECK(unicode::is_space(U'　'));
  CHECK(unicode::is_space(U'\x1f'));
  CHECK_FALSE(unicode::is_space(U'​'));
  CHECK(unicode::is_bleu_punct(U','));
  CHECK(unicode::is_bleu_punct(U'«'));
  // The reference tokenizer's character class swallows the backslash.
  CHECK_FALSE(unicode::is_bleu_punct(U'\\'));
  CHECK(unicode::is_bleu_symbol(U'$'));
  CHECK(unicode::is_bleu_symbol(U'€'));
  CHECK(unicode::is_decimal(U'7'));
  CHECK(unicode::is_decimal(U'٣'));
  CHECK(unicode::is_letter(U'é'));
  CHECK_FALSE(unicode::is_letter(U'4'));
  CHECK(unicode::to_lower(std::string_view("ÉCOLE Straße")) == "école straße");
}

TEST_CASE("whitespace splitting and trimming") {
  const auto parts = unicode::split_whitespace("  a\tbb c  ");
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[1] == "bb");
  CHECK(parts[2] == "c");
  CHECK(unicode::count_tokens("  a\tbb c  ") == 3);
  CHECK(unicode::count_tokens("") == 0);
  CHECK(unicode::trim("　 x y \t") == "x y");
  CHECK(unicode::rtrim(" x ") == " x");
  CHECK(unicode::trim("   ").empty());
}
