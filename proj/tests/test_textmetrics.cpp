#include <fstream>
#include <sstream>

#include "bleu_bruteforce.hpp"
#include "doctest.h"
#include "json.hpp"
#include "tagmt/textmetrics.hpp"
#include "test_util.hpp"

using namespace tagmt;
using metrics::FunctionWordList;

namespace {

nlohmann::json load_oracle() {
  std::ifstream in(std::string(TAGMT_TEST_DATA) + "/bleu_oracle.json");
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

std::vector<std::string> strings(const nlohmann::json& j) { return j.get<std::vector<std::string>>(); }

}  // namespace

TEST_CASE("lexical variety by hand") {
  CHECK(metrics::lexical_variety({"a a b"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(metrics::lexical_variety({"a", "a b"}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(metrics::lexical_variety({"x y z w"}) == 1.0);
  CHECK_THROWS_AS(metrics::lexical_variety({"", "  "}), Error);
  CHECK(metrics::lexical_variety_sentence_averaged({"a a", "b c"}) == doctest::Approx(0.75));
}

TEST_CASE("lexical density by hand") {
  const FunctionWordList fw("toy", {"the"});
  CHECK(metrics::lexical_density({"the cat sat"}, fw) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(metrics::lexical_density({"The THE the"}, fw) == 0.0);
  // tokens without letters are not content words
  CHECK(metrics::lexical_density({"cat 42 ."}, fw) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(metrics::lexical_density({""}, fw), Error);
}

TEST_CASE("length variety by hand") {
  CHECK(metrics::length_variety({testing::repeat_tokens(10)}, {testing::repeat_tokens(8)}) ==
        doctest::Approx(0.2).epsilon(1e-15));
  CHECK(metrics::length_variety({"a b", "c d e"}, {"x y", "z z z"}) == 0.0);
  try {
    metrics::length_variety({"a", " ", "b"}, {"a", "b", "c"});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("function word lists") {
  std::istringstream in("# comment\nthe\n\nof  # trailing\n");
  const auto fw = FunctionWordList::parse(in, "en");
  CHECK(fw.words() == std::set<std::string>{"the", "of"});
  CHECK_THROWS_AS(FunctionWordList("x", {"The"}), Error);
  CHECK_THROWS_AS(FunctionWordList("x", {}), Error);
  for (auto lang : {"en", "fr", "de"}) CHECK(FunctionWordList::builtin(lang).words().size() > 50);
  CHECK(FunctionWordList::builtin("en").is_function_word("The"));
  CHECK(FunctionWordList::builtin("fr").is_content_word("maison"));
  CHECK_THROWS_AS(FunctionWordList::builtin("xx"), Error);
}

TEST_CASE("metric invariants on randomized corpora") {
  Rng rng(31);
  for (int c = 0; c < 1000; ++c) {
    std::vector<std::string> lines;
    const auto n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) lines.push_back(testing::random_sentence(rng, 1, 8));
    const double ttr = metrics::lexical_variety(lines);
    CHECK(ttr > 0.0);
    CHECK(ttr <= 1.0);
    auto doubled = lines;
    doubled.insert(doubled.end(), lines.begin(), lines.end());
    CHECK(metrics::lexical_variety(doubled) == doctest::Approx(ttr / 2));
    CHECK(metrics::lexical_variety(doubled) < ttr);

    std::vector<std::string> same_length;
    for (const auto& l : lines) same_length.push_back(testing::repeat_tokens(unicode::count_tokens(l), "q"));
    CHECK(metrics::length_variety(lines, same_length) == 0.0);
  }
}

TEST_CASE("length variety shrinks as outputs approach source length") {
  const std::vector<std::string> src{testing::repeat_tokens(10), testing::repeat_tokens(6)};
  double prev = 1e9;
  for (std::size_t k = 0; k <= 4; ++k) {
    const std::vector<std::string> out{testing::repeat_tokens(14 - k), testing::repeat_tokens(2 + k)};
    const double lv = metrics::length_variety(src, out);
    CHECK(lv < prev);
    prev = lv;
  }
  CHECK(prev == 0.0);
}

TEST_CASE("international tokenizer matches the reference implementation") {
  const auto oracle = load_oracle();
  for (const auto& item : oracle["tokenize"]) {
    const auto in = item[0].get<std::string>();
    CHECK_MESSAGE(metrics::tokenize_intl(in) == item[1].get<std::string>(), in);
  }
}

TEST_CASE("BLEU matches frozen reference-scorer values") {
  const auto oracle = load_oracle();
  for (const auto& [name, c] : oracle["cases"].items()) {
    if (name == "short_hyp") continue;
    const auto r = metrics::corpus_bleu(strings(c["hyps"]), strings(c["refs"]));
    CHECK(std::abs(r.score - c["score"].get<double>()) <= 1e-9);
    CHECK(r.counts == c["counts"].get<std::vector<std::size_t>>());
    CHECK(r.totals == c["totals"].get<std::vector<std::size_t>>());
    CHECK(r.sys_len == c["sys_len"].get<std::size_t>());
    CHECK(r.ref_len == c["ref_len"].get<std::size_t>());
  }
  const auto& s = oracle["cases"]["short_hyp"];
  CHECK(metrics::corpus_bleu(strings(s["hyps"]), strings(s["refs"])).score == 0.0);
  for (const auto& c : oracle["singles"]) {
    const auto r = metrics::corpus_bleu(strings(c["hyps"]), strings(c["refs"]));
    CHECK(std::abs(r.score - c["score"].get<double>()) <= 1e-9);
  }
}

TEST_CASE("BLEU error paths and signature") {
  CHECK_THROWS_AS(metrics::corpus_bleu({"a"}, {"a", "b"}), Error);
  CHECK_THROWS_AS(metrics::corpus_bleu({}, {}), Error);
  CHECK_THROWS_AS(metrics::corpus_bleu({"", " "}, {"a", "b"}), Error);
  CHECK(metrics::bleu_signature({}) == "case.mixed+numrefs.1+smooth.exp+tok.intl+version.1.2.15");
  CHECK(metrics::bleu_signature({}, "en-fr", "wmt14") ==
        "case.mixed+lang.en-fr+numrefs.1+smooth.exp+test.wmt14+tok.intl+version.1.2.15");
  const auto r = metrics::corpus_bleu({"a b c d"}, {"e f g h"});
  CHECK(metrics::format_bleu(r, "sig") ==
        "BLEU+sig = 7.99 12.5/8.3/6.2/6.2 (BP = 1.000 ratio = 1.000 hyp_len = 4 ref_len = 4)");
}

TEST_CASE("BLEU properties: identity, permutation, brute-force agreement, monotone corruption") {
  Rng rng(77);
  std::vector<std::string> hyps, refs;
  for (int i = 0; i < 40; ++i) {
    refs.push_back(testing::random_sentence(rng, 3, 12));
    hyps.push_back(rng.bernoulli(0.5) ? refs.back() : testing::random_sentence(rng, 3, 12));
  }
  CHECK(metrics::corpus_bleu(refs, refs).score == doctest::Approx(100.0));
  const double base = metrics::corpus_bleu(hyps, refs).score;
  CHECK(base == doctest::Approx(testing::brute_force_bleu(hyps, refs)).epsilon(1e-12));

  auto ph = hyps, pr = refs;
  for (std::size_t i = ph.size(); i > 1; --i) {
    const auto j = rng.below(i);
    std::swap(ph[i - 1], ph[j]);
    std::swap(pr[i - 1], pr[j]);
  }
  CHECK(metrics::corpus_bleu(ph, pr).score == doctest::Approx(base).epsilon(1e-12));

  // exhaustive single-token corruption of a 5-sentence corpus
  const std::vector<std::string> small_refs{"the cat sat on the mat", "a b c d e", "x y z", "one two three four",
                                            "p q r s t u"};
  const std::vector<std::string> small_hyps{"the cat sat on a mat", "a b c d e", "x z y", "one two three five",
                                            "p q r s t u"};
  const double start = testing::brute_force_bleu(small_hyps, small_refs);
  CHECK(metrics::corpus_bleu(small_hyps, small_refs).score == doctest::Approx(start).epsilon(1e-12));
  for (std::size_t s = 0; s < small_hyps.size(); ++s) {
    const auto toks = unicode::split_whitespace(small_hyps[s]);
    for (std::size_t t = 0; t < toks.size(); ++t) {
      auto corrupted = small_hyps;
      std::string line;
      for (std::size_t k = 0; k < toks.size(); ++k) {
        if (k) line += ' ';
        line += k == t ? std::string("CORRUPT") : std::string(toks[k]);
      }
      corrupted[s] = line;
      const double brute = testing::brute_force_bleu(corrupted, small_refs);
      CHECK(brute <= start + 1e-12);
      CHECK(metrics::corpus_bleu(corrupted, small_refs).score == doctest::Approx(brute).epsilon(1e-12));
    }
  }
}

TEST_CASE("metric report serialization") {
  const auto fw = FunctionWordList("toy", {"the"});
  const std::vector<std::string> out{"the cat sat", "a dog"};
  const std::vector<std::string> src{"le chat", "un chien"};
  const auto r = metrics::measure(out, src, fw, &out);
  CHECK(r.token_count == 5);
  CHECK(r.type_count == 5);
  CHECK(r.lexical_variety == r.type_count / static_cast<double>(r.token_count));
  CHECK(r.bleu.has_value());
  const auto kv = metrics::to_key_value(r);
  CHECK(kv.find("lexical_density\t0.800000\n") != std::string::npos);
  const auto j = nlohmann::json::parse(metrics::to_json(r));
  CHECK(j["type_count"] == 5);
}
