#include <set>
#include <sstream>

#include "doctest.h"
#include "tagmt/corpus.hpp"
#include "tagmt/unicode.hpp"
#include "test_util.hpp"

using namespace tagmt;
using testing::repeat_tokens;

namespace {

std::size_t whitespace_count(std::string_view s) { return unicode::count_tokens(s); }

SentencePair pair_of_lengths(std::size_t src, std::size_t trg) {
  return {repeat_tokens(src, "s"), repeat_tokens(trg, "t")};
}

}  // namespace

TEST_CASE("dedup keeps first occurrence in order") {
  auto r = corpus::dedup(MonoCorpus{"a b", "a b", "c"});
  CHECK(r.items == MonoCorpus{"a b", "c"});
  CHECK(r.stats.dropped_by_rule["duplicate"] == 1);
  CHECK(r.stats.reconciles());

  auto empty = corpus::dedup(MonoCorpus{});
  CHECK(empty.items.empty());
  CHECK(empty.stats.dropped() == 0);
}

TEST_CASE("dedup against a set-membership oracle") {
  Rng rng(11);
  MonoCorpus lines;
  std::set<std::string> distinct;
  while (lines.size() < 900) {
    auto s = testing::random_sentence(rng, 3, 9);
    if (distinct.insert(s).second) lines.push_back(s);
  }
  for (int i = 0; i < 100; ++i) {
    const auto pos = rng.below(lines.size() + 1);
    const auto copy = lines[rng.below(lines.size())];
    lines.insert(lines.begin() + static_cast<long>(pos), copy);
  }
  REQUIRE(lines.size() == 1000);
  const auto r = corpus::dedup(lines);
  CHECK(r.stats.kept_count == 900);

  std::set<std::string> seen;
  MonoCorpus expected;
  for (const auto& l : lines) {
    if (seen.insert(l).second) expected.push_back(l);
  }
  CHECK(r.items == expected);
}

TEST_CASE("bitext length and ratio thresholds") {
  const corpus::SubwordCounter count = whitespace_count;
  CHECK(corpus::filter_bitext({pair_of_lengths(10, 4)}, count).stats.kept_count == 0);
  CHECK(corpus::filter_bitext({pair_of_lengths(4, 10)}, count).stats.kept_count == 0);
  CHECK(corpus::filter_bitext({pair_of_lengths(10, 5)}, count).stats.kept_count == 1);
  CHECK(corpus::filter_bitext({pair_of_lengths(250, 250)}, count).stats.kept_count == 1);
  const auto long_pair = corpus::filter_bitext({pair_of_lengths(251, 200)}, count);
  CHECK(long_pair.stats.dropped_by_rule.at("too_many_subwords") == 1);

  SentencePair blank{"a", "b"};
  CHECK_THROWS_AS(corpus::filter_bitext({blank}, [](std::string_view s) { return s == "b" ? 0u : 1u; }), Error);
}

TEST_CASE("bitext filter on crafted corpus matches per-pair recount") {
  Rng rng(3);
  ParallelCorpus corpus;
  std::size_t violations = 0;
  for (int i = 0; i < 50; ++i) {
    std::size_t s = 1 + rng.below(20);
    std::size_t t = s + rng.below(s + 1);  // ratio <= 2
    if (i % 7 == 3) {
      t = 2 * s + 1 + rng.below(5);
      ++violations;
    }
    corpus.push_back(rng.bernoulli(0.5) ? pair_of_lengths(s, t) : pair_of_lengths(t, s));
  }
  REQUIRE(violations == 7);
  const auto r = corpus::filter_bitext(corpus, whitespace_count);
  std::size_t oracle = 0;
  for (const auto& p : corpus) {
    const double a = static_cast<double>(whitespace_count(p.source));
    const double b = static_cast<double>(whitespace_count(p.target));
    if (a <= 250 && b <= 250 && a / b <= 2.0 && b / a <= 2.0) ++oracle;
  }
  CHECK(oracle == 43);
  CHECK(r.stats.kept_count == 43);
  CHECK(r.stats.reconciles());
}

TEST_CASE("monolingual filter rules") {
  CHECK(corpus::filter_mono({repeat_tokens(71)}).stats.kept_count == 0);
  const auto seventy = repeat_tokens(70);
  REQUIRE(seventy.size() == 139);
  CHECK(corpus::filter_mono({seventy}).stats.kept_count == 1);

  std::string long_chars = repeat_tokens(10, std::string(49, 'x'));  // 499 chars
  long_chars += "xx";
  REQUIRE(unicode::length(long_chars) == 501);
  const auto r = corpus::filter_mono({long_chars});
  CHECK(r.stats.dropped_by_rule.at("too_many_chars") == 1);

  // characters are scalars, not bytes
  std::string accented;
  for (int i = 0; i < 500; ++i) accented += "é";
  CHECK(corpus::filter_mono({accented}).stats.kept_count == 1);
}

TEST_CASE("back-translated source bounds") {
  CHECK(corpus::filter_backtranslated({{repeat_tokens(76), "t"}}).stats.kept_count == 0);
  std::string src = repeat_tokens(75, "abcdefg");  // 599 chars
  src = repeat_tokens(74, "abcdef") + " " + std::string(32, 'z');
  REQUIRE(unicode::count_tokens(src) == 75);
  REQUIRE(src.size() == 550);
  CHECK(corpus::filter_backtranslated({{src, "t"}}).stats.kept_count == 1);
  CHECK(corpus::filter_backtranslated({{src + "z", "t"}}).stats.kept_count == 0);

  Rng rng(5);
  ParallelCorpus corpus;
  for (int i = 0; i < 20; ++i) {
    std::size_t n = 5 + rng.below(60);
    if (i % 5 == 0) n = 76 + rng.below(10);
    corpus.push_back({repeat_tokens(n, "w"), "target"});
  }
  CHECK(corpus::filter_backtranslated(corpus).stats.kept_count == 16);
}

TEST_CASE("language filter") {
  const corpus::LanguagePredicate yes = [](std::string_view) { return true; };
  const auto same = corpus::filter_language({{"hello", "hello"}, {"a", "b"}}, yes, yes);
  CHECK(same.stats.kept_count == 1);
  CHECK(same.stats.dropped_by_rule.at("identical_sides") == 1);
  CHECK(corpus::filter_language({{"a", "b"}, {"c", "d"}}, yes, yes).stats.kept_count == 2);
}

TEST_CASE("character-profile language id drops mislabeled pairs") {
  Rng rng(21);
  const std::string_view latin = "abcdefghijklm";
  const std::string_view greek = "αβγδεζηθικλμν";
  auto sentence = [&](std::u32string_view alphabet) {
    std::u32string s;
    const auto words = 3 + rng.below(6);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) s += U' ';
      const auto len = 2 + rng.below(6);
      for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
    }
    return unicode::encode(s);
  };
  const auto a = unicode::decode(latin);
  const auto b = unicode::decode(greek);

  corpus::CharProfileIdentifier lid;
  MonoCorpus sample_a, sample_b;
  for (int i = 0; i < 200; ++i) {
    sample_a.push_back(sentence(a));
    sample_b.push_back(sentence(b));
  }
  lid.add_language("src", sample_a);
  lid.add_language("trg", sample_b);

  ParallelCorpus mix;
  std::vector<bool> mislabeled;
  for (int i = 0; i < 1000; ++i) {
    const bool bad = i % 2 == 1;
    if (bad) {
      mix.push_back(rng.bernoulli(0.5) ? SentencePair{sentence(b), sentence(b)}
                                       : SentencePair{sentence(b), sentence(a)});
    } else {
      mix.push_back({sentence(a), sentence(b)});
    }
    mislabeled.push_back(bad);
  }
  const auto r = corpus::filter_language(mix, lid.predicate_for("src"), lid.predicate_for("trg"));
  std::set<std::pair<std::string, std::string>> kept;
  for (const auto& p : r.items) kept.emplace(p.source, p.target);
  std::size_t bad_total = 0, bad_dropped = 0, good_dropped = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    const bool was_kept = kept.count({mix[i].source, mix[i].target}) > 0;
    if (mislabeled[i]) {
      ++bad_total;
      if (!was_kept) ++bad_dropped;
    } else if (!was_kept) {
      ++good_dropped;
    }
  }
  CHECK(static_cast<double>(bad_dropped) / static_cast<double>(bad_total) >= 0.95);
  CHECK(good_dropped == 0);
}

TEST_CASE("filters are idempotent, order preserving and item local") {
  Rng rng(99);
  ParallelCorpus corpus;
  MonoCorpus mono;
  for (int i = 0; i < 300; ++i) {
    const auto s = testing::random_sentence(rng, 1, 90);
    const auto t = rng.bernoulli(0.1) ? s : testing::random_sentence(rng, 1, 90);
    corpus.push_back({s, t});
    mono.push_back(s);
  }
  const corpus::LanguagePredicate has_a = [](std::string_view s) { return s.find('a') != std::string_view::npos; };

  const auto check_parallel = [&](auto filter, auto keep) {
    const auto once = filter(corpus);
    const auto twice = filter(once.items);
    CHECK(once.items == twice.items);
    CHECK(once.stats.reconciles());
    ParallelCorpus oracle;
    for (const auto& p : corpus) {
      if (keep(p)) oracle.push_back(p);
    }
    CHECK(once.items == oracle);
  };
  check_parallel([](const ParallelCorpus& c) { return corpus::filter_bitext(c, whitespace_count, 50, 2.0); },
                 [](const SentencePair& p) {
                   const double a = static_cast<double>(whitespace_count(p.source));
                   const double b = static_cast<double>(whitespace_count(p.target));
                   return a <= 50 && b <= 50 && std::max(a, b) / std::min(a, b) <= 2.0;
                 });
  check_parallel([](const ParallelCorpus& c) { return corpus::filter_backtranslated(c, 60, 300); },
                 [](const SentencePair& p) {
                   return whitespace_count(p.source) <= 60 && unicode::length(p.source) <= 300;
                 });
  check_parallel([&](const ParallelCorpus& c) { return corpus::filter_language(c, has_a, has_a); },
                 [&](const SentencePair& p) { return p.source != p.target && has_a(p.source) && has_a(p.target); });
  check_parallel([](const ParallelCorpus& c) { return corpus::dedup(c); }, [seen = std::set<std::string>()](
                                                                               const SentencePair& p) mutable {
    return seen.insert(p.source + "\t" + p.target).second;
  });

  const auto m1 = corpus::filter_mono(mono, 40, 200);
  CHECK(corpus::filter_mono(m1.items, 40, 200).items == m1.items);
  CHECK(m1.stats.reconciles());
}

TEST_CASE("parallel TSV reading accepts plain, tagged and inline forms") {
  ParallelCorpus corpus{{"a b", "c d", Origin::SourceOriginal, false},
                        {"e", "f", Origin::TargetOriginal, true},
                        {"g", "h", Origin::Unknown, false}};
  for (auto form : {corpus::TsvForm::Tagged, corpus::TsvForm::Inline}) {
    std::stringstream ss;
    corpus::write_parallel_tsv(ss, corpus, form);
    CHECK(corpus::read_parallel_tsv(ss) == corpus);
  }
  std::stringstream plain("x\ty\n");
  const auto p = corpus::read_parallel_tsv(plain);
  REQUIRE(p.size() == 1);
  CHECK(p[0].origin == Origin::Unknown);

  std::stringstream bad_origin("x\ty\tsomewhere\n");
  CHECK_THROWS_AS(corpus::read_parallel_tsv(bad_origin), Error);
  std::stringstream empty_side("x\t  \n");
  CHECK_THROWS_AS(corpus::read_parallel_tsv(empty_side), Error);
}

TEST_CASE("filter report lists every rule") {
  const auto r = corpus::filter_mono({repeat_tokens(80), "ok"});
  std::ostringstream out;
  corpus::write_filter_report(out, r.stats);
  CHECK(out.str() == "input\t2\nkept\t1\ntoo_many_tokens\t1\n");
}
