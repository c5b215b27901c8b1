#include <set>
#include <sstream>

#include "doctest.h"
#include "tagmt/classifier.hpp"
#include "tagmt/synthdata.hpp"
#include "test_util.hpp"

using namespace tagmt;
using namespace tagmt::synth;

namespace {

MonoCorpus lines_from(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  MonoCorpus out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_sentence(rng, 3, 10));
  return out;
}

// Drops the last line of every batch.
class LossyTranslator : public Translator {
 public:
  LossyTranslator() : Translator(Direction::SourceToTarget) {}
  std::vector<std::string> translate(const std::vector<std::string>& lines) override {
    if (++calls_ < 3) return lines;
    return {lines.begin(), lines.end() - 1};
  }

 private:
  int calls_ = 0;
};

std::size_t count(const LabeledCorpus& data, Label label) {
  std::size_t n = 0;
  for (const auto& s : data) n += s.label == label;
  return n;
}

}  // namespace

TEST_CASE("toy translator substitutes, reorders and drops words") {
  ToyTranslator::Options opt;
  opt.lexicon = {{"a", "x"}, {"b", "y"}};
  ToyTranslator plain(Direction::SourceToTarget, opt);
  CHECK(plain.translate_line("a b c") == "x y c");
  opt.reorder = Reorder::Reverse;
  CHECK(ToyTranslator(Direction::SourceToTarget, opt).translate_line("a b c") == "c y x");
  opt.reorder = Reorder::SwapPairs;
  CHECK(ToyTranslator(Direction::SourceToTarget, opt).translate_line("a b c d  e") == "y x d c e");

  opt.reorder = Reorder::None;
  opt.dropout = 0.5;
  ToyTranslator noisy(Direction::SourceToTarget, opt);
  const auto input = testing::repeat_tokens(200, "a");
  const auto out = noisy.translate_line(input);
  const auto kept = unicode::count_tokens(out);
  CHECK(kept > 60);
  CHECK(kept < 140);
  CHECK(noisy.translate_line(input) == out);
  CHECK(noisy.translate({"z", input, "q"})[1] == out);  // independent of batch position
  CHECK(noisy.translate_line("a") == "x");

  opt.dropout = 1.0;
  CHECK_THROWS_AS(ToyTranslator(Direction::SourceToTarget, opt), Error);
  opt.dropout = 0;
  opt.lexicon = {{"a b", "x"}};
  CHECK_THROWS_AS(ToyTranslator(Direction::SourceToTarget, opt), Error);
}

TEST_CASE("lexicon files") {
  std::istringstream in("# comment\na\tx\nb\ty\n\nc\tx\n");
  const auto lex = read_lexicon(in);
  CHECK(lex.size() == 3);
  const auto inv = invert_lexicon(lex);
  CHECK(inv.at("x") == "a");
  CHECK(inv.at("y") == "b");
  std::istringstream dup("a\tx\na\ty\n");
  CHECK_THROWS_AS(read_lexicon(dup), Error);
  std::istringstream bad("a x\n");
  CHECK_THROWS_AS(read_lexicon(bad), Error);
}

TEST_CASE("forward-translation dataset counts and provenance") {
  auto toy = ToyTranslator::identity(Direction::SourceToTarget);
  const auto src = lines_from(1, 100);
  const auto trg = lines_from(2, 100);
  const auto ds = build_ft_dataset(src, trg, *toy, 7);
  CHECK(ds.sentences.size() == 200);
  CHECK(count(ds.sentences, Label::Original) == 100);
  CHECK(count(ds.sentences, Label::Translated) == 100);
  for (std::size_t i = 0; i < ds.sentences.size(); ++i) {
    const auto& p = ds.provenance[i];
    if (ds.sentences[i].label == Label::Translated) {
      CHECK(p.corpus == "source_mono");
      CHECK(ds.sentences[i].text == src[p.index]);  // identity: verbatim, still Translated
    } else {
      CHECK(p.corpus == "target_mono");
      CHECK(ds.sentences[i].text == trg[p.index]);
    }
  }

  const auto truncated = build_ft_dataset(lines_from(3, 50), trg, *toy);
  CHECK(truncated.sentences.size() == 100);
  CHECK(count(truncated.sentences, Label::Original) == 50);

  auto backwards = ToyTranslator::identity(Direction::TargetToSource);
  CHECK_THROWS_AS(build_ft_dataset(src, trg, *backwards), Error);
  CHECK_THROWS_AS(build_ft_dataset({}, trg, *toy), Error);
}

TEST_CASE("round-trip dataset is balanced and content-matched") {
  ToyTranslator::Options fwd, back;
  fwd.lexicon = {{"s1", "t1"}, {"s2", "t2"}};
  back.lexicon = {{"t1", "s1"}, {"t2", "s2"}, {"u1", "s1"}};
  back.dropout = 0.2;
  ToyTranslator t2s(Direction::TargetToSource, back), s2t(Direction::SourceToTarget, fwd);
  const MonoCorpus trg = {"t1 u1 t2", "u1 u1 u1 u1", "t2 t2 t1 t1 zz"};
  const auto ds = build_rtt_dataset(trg, t2s, s2t, 2, true);
  REQUIRE(ds.sentences.size() == 6);
  CHECK(ds.intermediate.size() == 3);
  std::map<std::size_t, int> per_index;
  for (std::size_t i = 0; i < ds.sentences.size(); ++i) {
    if (ds.sentences[i].label == Label::Translated) ++per_index[ds.provenance[i].index];
  }
  CHECK(per_index.size() == 3);
  for (auto& [idx, n] : per_index) CHECK(n == 1);
  for (std::size_t i = 1; i < ds.sentences.size(); i += 2) {
    CHECK(ds.sentences[i].text.find("u1") == std::string::npos);  // synonyms normalized away
    CHECK(ds.provenance[i].index == ds.provenance[i - 1].index);
  }

  auto id_back = ToyTranslator::identity(Direction::TargetToSource);
  auto id_fwd = ToyTranslator::identity(Direction::SourceToTarget);
  const auto same = build_rtt_dataset(trg, *id_back, *id_fwd);
  for (std::size_t i = 0; i < same.sentences.size(); i += 2) CHECK(same.sentences[i].text == same.sentences[i + 1].text);
  CHECK(build_rtt_dataset(trg, t2s, s2t).sentences == build_rtt_dataset(trg, t2s, s2t).sentences);
  CHECK_THROWS_AS(build_rtt_dataset(trg, s2t, t2s), Error);
}

TEST_CASE("translator line-count mismatch names the batch") {
  LossyTranslator lossy;
  try {
    translate_batched(lossy, lines_from(4, 50), 10);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("batch 2") != std::string::npos);
  }
}

TEST_CASE("subprocess bridge") {
  SubprocessTranslator upper(Direction::SourceToTarget, "tr a-z A-Z");
  CHECK(upper.translate({"abc def", "x"}) == std::vector<std::string>{"ABC DEF", "X"});
  CHECK(upper.translate({}).empty());

  // larger than a pipe buffer in both directions
  const auto big = lines_from(5, 20000);
  SubprocessTranslator cat(Direction::SourceToTarget, "cat");
  CHECK(translate_batched(cat, big, 8000) == big);

  SubprocessTranslator failing(Direction::SourceToTarget, "cat >/dev/null; exit 3");
  CHECK_THROWS_AS(failing.translate({"a"}), Error);
  SubprocessTranslator short_output(Direction::SourceToTarget, "head -n 1");
  CHECK_THROWS_AS(translate_batched(short_output, {"a", "b"}), Error);
}

TEST_CASE("classifier separates toy round-trip translations") {
  // target words w0..w59; w40..w59 are synonyms of w0..w19 that the
  // round trip normalizes, and the forward direction drops words
  ToyTranslator::Options back, fwd;
  for (int i = 0; i < 40; ++i) {
    back.lexicon["w" + std::to_string(i)] = "s" + std::to_string(i);
    fwd.lexicon["s" + std::to_string(i)] = "w" + std::to_string(i);
  }
  for (int i = 40; i < 60; ++i) back.lexicon["w" + std::to_string(i)] = "s" + std::to_string(i - 40);
  fwd.dropout = 0.1;
  ToyTranslator t2s(Direction::TargetToSource, back), s2t(Direction::SourceToTarget, fwd);

  auto mono = [](std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    MonoCorpus out;
    for (std::size_t i = 0; i < n; ++i) {
      std::string line;
      const std::size_t len = 5 + rng.below(10);
      for (std::size_t k = 0; k < len; ++k) line += (k ? " w" : "w") + std::to_string(rng.below(60));
      out.push_back(line);
    }
    return out;
  };
  const auto train = build_rtt_dataset(mono(1, 600), t2s, s2t).sentences;
  const auto dev = build_rtt_dataset(mono(2, 100), t2s, s2t).sentences;
  const auto test = build_rtt_dataset(mono(3, 300), t2s, s2t).sentences;
  MonoCorpus text;
  for (const auto& s : train) text.push_back(s.text);
  classifier::ClassifierConfig cfg;
  cfg.embedding_dim = 16;
  cfg.filters = 16;
  cfg.epochs = 4;
  const auto result = classifier::train_classifier(train, dev, cfg, subword::learn_bpe(text, 80));
  const auto stats = classifier::evaluate(result.model, test);
  MESSAGE("toy RTT held-out F1 " << stats.f1);
  CHECK(stats.f1 >= 0.8);
}
