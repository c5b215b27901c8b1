#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "tagmt/toymt.hpp"
#include "test_util.hpp"

using namespace tagmt;
using namespace tagmt::toymt;

namespace {

QuadrantSpec small_spec() {
  QuadrantSpec s;
  s.source_vocab_size = 12;
  s.min_length = 3;
  s.max_length = 6;
  s.src_orig_count = 400;
  s.trg_orig_count = 400;
  s.zero_shot_count = 40;
  s.trg_orig_test_count = 40;
  s.dev_count = 40;
  s.seed = 3;
  return s;
}

ToyMtConfig small_config() {
  ToyMtConfig c;
  c.embedding_dim = 16;
  c.hidden_dim = 24;
  c.batch_size = 16;
  c.epochs = 6;
  c.eval_interval = 50;
  c.seed = 2;
  return c;
}

ParallelCorpus with_origin_tags(ParallelCorpus c) {
  for (auto& p : c) p.tagged = p.origin == Origin::TargetOriginal;
  return c;
}

const ToyTrainingResult& trained() {
  static const ToyTrainingResult r = [] {
    const auto data = generate_quadrant_data(small_spec());
    return train_toymt(with_origin_tags(data.training()), with_origin_tags(data.dev), small_config());
  }();
  return r;
}

}  // namespace

TEST_CASE("quadrant data has the requested splits") {
  const auto spec = small_spec();
  const auto d = generate_quadrant_data(spec);
  CHECK(d.src_orig.size() == 400);
  CHECK(d.trg_orig.size() == 400);
  CHECK(d.dev.size() == 40);
  CHECK(d.zero_shot.pairs.size() == 40);
  CHECK(d.zero_shot.natural_references.size() == 40);
  CHECK(d.trg_orig_test.size() == 40);
  CHECK(d.training().size() == 800);
  for (const auto& p : d.src_orig) CHECK(p.origin == Origin::SourceOriginal);
  for (const auto& p : d.trg_orig) CHECK(p.origin == Origin::TargetOriginal);
  CHECK(d.dev.front().origin == Origin::SourceOriginal);
  CHECK(d.dev.back().origin == Origin::TargetOriginal);

  const auto fwd = d.lexicon.forward();
  for (const auto& p : d.src_orig) {
    const auto s = unicode::split_whitespace(p.source);
    const auto t = unicode::split_whitespace(p.target);
    REQUIRE(s.size() == t.size());
    CHECK(s.size() >= 3);
    CHECK(s.size() <= 6);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(fwd.at(std::string(s[i])) == t[i]);
  }
  // natural targets read in reversed source order
  const auto back = d.lexicon.backward();
  for (const auto& p : d.trg_orig) {
    const auto s = unicode::split_whitespace(p.source);
    const auto t = unicode::split_whitespace(p.target);
    REQUIRE(s.size() == t.size());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(back.at(std::string(t[i])) == s[i]);
  }
  CHECK(generate_quadrant_data(spec).trg_orig == d.trg_orig);
}

TEST_CASE("synonym rate follows the spec") {
  for (double p : {0.0, 0.3, 0.5, 0.9}) {
    auto spec = small_spec();
    spec.synonym_probability = p;
    spec.trg_orig_count = 2000;
    const auto d = generate_quadrant_data(spec);
    MonoCorpus natural, literal;
    for (const auto& q : d.trg_orig) natural.push_back(q.target);
    for (const auto& q : d.src_orig) literal.push_back(q.target);
    CHECK(synonym_rate(natural, d.lexicon) == doctest::Approx(p).epsilon(0.0).scale(1.0).epsilon(0.03));
    CHECK(synonym_rate(literal, d.lexicon) == 0.0);
  }
}

TEST_CASE("without synonyms or reordering both styles coincide") {
  auto spec = small_spec();
  spec.synonym_probability = 0;
  spec.reorder = synth::Reorder::None;
  const auto d = generate_quadrant_data(spec);
  const auto fwd = d.lexicon.forward();
  for (const auto& p : d.trg_orig) {
    std::string literal;
    for (auto w : unicode::split_whitespace(p.source)) literal += (literal.empty() ? "" : " ") + fwd.at(std::string(w));
    CHECK(literal == p.target);
  }
  for (std::size_t i = 0; i < d.zero_shot.pairs.size(); ++i) {
    CHECK(d.zero_shot.pairs[i].target == d.zero_shot.natural_references[i]);
  }
}

TEST_CASE("lexicon words are distinct and collisions are reported") {
  const auto lex = make_lexicon(200, 5);
  std::set<std::string> all(lex.source.begin(), lex.source.end());
  all.insert(lex.literal.begin(), lex.literal.end());
  all.insert(lex.synonym.begin(), lex.synonym.end());
  CHECK(all.size() == 600);
  CHECK_THROWS_AS(make_lexicon(100000, 5), Error);
}

TEST_CASE("quadrant spec text round trip and errors") {
  auto spec = small_spec();
  spec.synonym_probability = 0.37;
  spec.reorder = synth::Reorder::SwapPairs;
  std::istringstream in(spec.to_text() + "# comment\n\n");
  const auto back = QuadrantSpec::parse(in);
  CHECK(back.to_text() == spec.to_text());
  std::istringstream bad("colour = blue\n");
  CHECK_THROWS_AS(QuadrantSpec::parse(bad), Error);
  std::istringstream bad_len("min_length = 9\nmax_length = 3\n");
  CHECK_THROWS_AS(QuadrantSpec::parse(bad_len), Error);
  std::istringstream neg("seed = -4\n");
  CHECK_THROWS_AS(QuadrantSpec::parse(neg), Error);
}

TEST_CASE("vocabulary and config") {
  const ParallelCorpus c = {{"b a", "z y", Origin::Unknown, false}};
  const Vocabulary v(c);
  CHECK(v.size() == 8);
  CHECK(v.token(Vocabulary::kTag) == kTagToken);
  CHECK(v.id("a") == 4);
  CHECK(v.id("nope") == Vocabulary::kUnk);
  CHECK_THROWS_AS(Vocabulary(std::vector<std::string>{"a", "b"}), Error);

  const auto cfg = small_config();
  CHECK(ToyMtConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  CHECK_THROWS_AS(ToyMtConfig::from_json(R"({"hidden": 3})"), Error);
  CHECK_THROWS_AS(ToyMtConfig::from_json(R"({"ema_decay": 1.5})"), Error);
}

TEST_CASE("analytic gradients match finite differences") {
  ToyMtConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 8;
  nn::ParameterSet<double> params;
  const std::size_t vocab = 9;
  declare_parameters(params, cfg, vocab);
  for (auto& p : params) {
    if (p.shape.size() == 2) nn::init_fan_scaled(p, 11, p.shape[0], p.shape[1]);
    else nn::init_uniform(p, 11, 0.3);
  }
  const std::vector<Sequence> seqs = {{{3, 4, 5, 6}, {7, 8, 4}}, {{5, 8}, {6, 6, 7, 4, 5}}, {{0, 7, 4}, {}}};
  std::vector<const Sequence*> batch;
  for (const auto& s : seqs) batch.push_back(&s);
  const auto result = nn::gradient_check(
      [&](nn::ParameterSet<double>& p, bool with_grad) { return sequence_loss(p, cfg, batch, with_grad); }, params,
      1e-6, 600, 3);
  INFO(result.worst_parameter);
  CHECK(result.max_relative_error <= 1e-3);
}

TEST_CASE("training lowers the loss and keeps the best checkpoint") {
  const auto& r = trained();
  const auto& ev = r.log.evaluations;
  REQUIRE(ev.size() >= 4);
  CHECK(ev[1].mean_loss < ev[0].mean_loss);
  CHECK(ev[2].mean_loss < ev[1].mean_loss);
  CHECK(ev[3].mean_loss < ev[2].mean_loss);
  CHECK(r.log.warnings.empty());
  for (const auto& e : ev) CHECK(e.dev_bleu <= ev[r.log.best_evaluation].dev_bleu);

  const auto data = generate_quadrant_data(small_spec());
  CHECK(dev_score(r.model, with_origin_tags(data.dev)) == doctest::Approx(ev[r.log.best_evaluation].dev_bleu));
  CHECK(ev[r.log.best_evaluation].dev_bleu > 35.0);
}

TEST_CASE("decoding contracts") {
  const auto& m = trained().model;
  const auto data = generate_quadrant_data(small_spec());
  for (const auto& p : data.zero_shot.pairs) {
    for (bool natural : {false, true}) {
      for (std::size_t beam : {1u, 4u}) {
        const auto out = m.decode(p.source, natural, beam);
        CHECK(out.find(kTagToken) == std::string::npos);
        CHECK(unicode::count_tokens(out) <= 2 * unicode::count_tokens(p.source) + 10);
      }
    }
    // natural mode is exactly the untagged decode of the tag-prefixed source
    CHECK(m.decode_ids(m.encode_source(p.source, true)) ==
          m.decode_ids([&] {
            auto ids = m.encode_source(p.source, false);
            ids.insert(ids.begin(), Vocabulary::kTag);
            return ids;
          }()));
  }
  auto capped = m;
  auto cfg = m.config();
  cfg.max_decode_length = 2;
  ToyMtModel short_model(cfg, m.vocab());
  short_model.params() = m.params();
  for (const auto& p : data.zero_shot.pairs) CHECK(unicode::count_tokens(short_model.decode(p.source, false, 3)) <= 2);
  CHECK_THROWS_AS(m.decode("   ", false), Error);
  CHECK_THROWS_AS(m.decode("x", false, 0), Error);
}

TEST_CASE("checkpoint round trip decodes identically") {
  const auto& m = trained().model;
  const auto path = (std::filesystem::temp_directory_path() / "tagmt_toymt_test.ckpt").string();
  m.save_file(path);
  const auto back = ToyMtModel::load_file(path);
  std::filesystem::remove(path);
  CHECK(back.params().checksum() == m.params().checksum());
  const auto data = generate_quadrant_data(small_spec());
  for (const auto& p : data.trg_orig_test) CHECK(back.decode(p.source, true) == m.decode(p.source, true));
}

TEST_CASE("training is deterministic") {
  auto spec = small_spec();
  spec.src_orig_count = spec.trg_orig_count = 60;
  auto cfg = small_config();
  cfg.epochs = 2;
  cfg.eval_interval = 4;
  const auto data = generate_quadrant_data(spec);
  const auto a = train_toymt(with_origin_tags(data.training()), data.dev, cfg);
  const auto b = train_toymt(with_origin_tags(data.training()), data.dev, cfg);
  CHECK(a.model.params().checksum() == b.model.params().checksum());
  cfg.seed = 99;
  const auto c = train_toymt(with_origin_tags(data.training()), data.dev, cfg);
  CHECK(c.model.params().checksum() != a.model.params().checksum());

  // one domain only: trains, with a warning
  const auto single = train_toymt(data.training(), data.dev, cfg);
  CHECK(single.log.warnings.size() == 1);
}

TEST_CASE("without style differences the tag changes almost nothing") {
  auto spec = small_spec();
  spec.synonym_probability = 0;
  spec.reorder = synth::Reorder::None;
  const auto data = generate_quadrant_data(spec);
  const auto r = train_toymt(with_origin_tags(data.training()), with_origin_tags(data.dev), small_config());
  std::size_t same = 0;
  for (const auto& p : data.zero_shot.pairs) same += r.model.decode(p.source, false) == r.model.decode(p.source, true);
  CHECK(static_cast<double>(same) >= 0.95 * static_cast<double>(data.zero_shot.pairs.size()));
}
