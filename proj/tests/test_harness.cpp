#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tagmt/classifier.hpp"
#include "tagmt/harness.hpp"

using namespace tagmt;
using namespace tagmt::harness;

namespace {

toymt::QuadrantSpec small_spec() {
  toymt::QuadrantSpec s;
  s.source_vocab_size = 12;
  s.min_length = 3;
  s.max_length = 6;
  s.src_orig_count = 400;
  s.trg_orig_count = 400;
  s.zero_shot_count = 60;
  s.trg_orig_test_count = 40;
  s.dev_count = 40;
  s.seed = 7;
  return s;
}

toymt::ToyMtConfig small_config() {
  toymt::ToyMtConfig c;
  c.embedding_dim = 16;
  c.hidden_dim = 24;
  c.batch_size = 16;
  c.epochs = 6;
  c.eval_interval = 50;
  c.seed = 2;
  return c;
}

const toymt::ToyMtModel& model() {
  static const toymt::ToyMtModel m = [] {
    const auto data = toymt::generate_quadrant_data(small_spec());
    auto train = tagging::apply_policy(data.training(), tagging::policy::OriginLabel{}).corpus;
    return toymt::train_toymt(train, data.dev, small_config()).model;
  }();
  return m;
}

}  // namespace

TEST_CASE("grid report shape and combined score recount") {
  const auto data = toymt::generate_quadrant_data(small_spec());
  const auto test = GridTestSet::from_quadrants(data);
  CHECK(test.pairs.size() == 100);
  CHECK(test.natural_references.size() == 100);
  const auto r = run_grid_eval(model(), test, {metrics::FunctionWordList::builtin("en"), 1, "origin-label", 7});
  CHECK(r.cells.size() == 4);
  CHECK(r.cell(Half::SourceOriginal, Mode::Natural).outputs.size() == 60);
  CHECK(r.cell(Half::TargetOriginal, Mode::Translationese).outputs.size() == 40);
  for (const auto& c : r.cells) {
    CHECK(c.natural_reference_bleu.has_value());
    CHECK(c.metrics.bleu == c.bleu);
  }

  std::vector<std::string> hyps = r.cell(Half::SourceOriginal, Mode::Translationese).outputs;
  const auto& nat = r.cell(Half::TargetOriginal, Mode::Natural).outputs;
  hyps.insert(hyps.end(), nat.begin(), nat.end());
  std::vector<std::string> refs;
  for (const auto& p : test.pairs) refs.push_back(p.target);
  CHECK(r.combined_bleu == metrics::corpus_bleu(hyps, refs).score);
  CHECK(r.combined_macro_bleu ==
        doctest::Approx((r.cell(Half::SourceOriginal, Mode::Translationese).bleu +
                         r.cell(Half::TargetOriginal, Mode::Natural).bleu) / 2));

  // reproducible
  const auto again = run_grid_eval(model(), test, {metrics::FunctionWordList::builtin("en"), 1, "origin-label", 7});
  CHECK(again.to_json() == r.to_json());
  CHECK(r.to_text().find("combined matched BLEU") != std::string::npos);
}

TEST_CASE("grid eval preconditions") {
  const auto data = toymt::generate_quadrant_data(small_spec());
  auto test = GridTestSet::from_quadrants(data);
  test.pairs[3].origin = Origin::Unknown;
  CHECK_THROWS_AS(run_grid_eval(model(), test), Error);
  GridTestSet one_half{data.trg_orig_test, {}};
  CHECK_THROWS_AS(run_grid_eval(model(), one_half), Error);
  CHECK(bleu_or_zero({"", ""}, {"a", "b"}) == 0.0);
}

TEST_CASE("policy comparison holds data constant") {
  CHECK_THROWS_AS(compare_policies(small_spec(), {tagging::policy::Untagged{}}, small_config()), Error);

  auto spec = small_spec();
  spec.src_orig_count = spec.trg_orig_count = 80;
  auto cfg = small_config();
  cfg.epochs = 2;
  const auto cmp = compare_policies(spec, {tagging::policy::Untagged{}, tagging::policy::AllTagged{}}, cfg);
  REQUIRE(cmp.runs.size() == 2);
  CHECK(cmp.runs[0].stats.tagged == 0);
  CHECK(cmp.runs[1].stats.tagged == 160);
  CHECK(cmp.runs[0].stats.total == cmp.runs[1].stats.total);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(cmp.runs[0].report.cells[i].outputs.size() == cmp.runs[1].report.cells[i].outputs.size());
  }
  CHECK(cmp.to_text().find("all-tagged") != std::string::npos);
  CHECK(cmp.to_json().find("\"untagged\"") != std::string::npos);
}

TEST_CASE("length carries no signal here, the classifier does") {
  const auto spec = small_spec();
  const auto data = toymt::generate_quadrant_data(spec);

  // classifier trained on target-side text: natural targets vs literal translations
  LabeledCorpus train, dev;
  MonoCorpus texts;
  for (std::size_t i = 0; i < data.src_orig.size(); ++i) {
    auto& into = i % 5 == 0 ? dev : train;
    into.push_back({data.trg_orig[i].target, Label::Original});
    into.push_back({data.src_orig[i].target, Label::Translated});
    texts.push_back(data.trg_orig[i].target);
    texts.push_back(data.src_orig[i].target);
  }
  classifier::ClassifierConfig ccfg;
  ccfg.embedding_dim = 16;
  ccfg.filters = 16;
  ccfg.epochs = 3;
  ccfg.eval_interval = 20;
  const auto clf = std::make_shared<classifier::ClassifierModel>(
      classifier::train_classifier(train, dev, ccfg, subword::learn_bpe(texts, 60)).model);

  MonoCorpus sources, targets;
  for (const auto& p : data.training()) {
    sources.push_back(p.source);
    targets.push_back(p.target);
  }
  const double rho = tagging::compute_length_threshold(sources, targets);
  CHECK(rho == 1.0);

  const auto cmp = compare_policies(spec, {tagging::policy::Classifier{clf, 0.5}, tagging::policy::LengthRatio{rho}},
                                    small_config());
  const auto& by_classifier = cmp.runs[0];
  const auto& by_length = cmp.runs[1];
  CHECK(by_length.stats.tagged == 0);
  CHECK(by_classifier.stats.tagged > 300);
  MESSAGE("tag effect: classifier " << by_classifier.report.tag_effect() << ", length " << by_length.report.tag_effect());
  CHECK(by_classifier.report.tag_effect() > 0.01);
  CHECK(std::abs(by_length.report.tag_effect()) < by_classifier.report.tag_effect() / 4);
}

TEST_CASE("run manifest round trip and file hashing") {
  const auto dir = std::filesystem::temp_directory_path() / "tagmt_manifest_test";
  std::filesystem::create_directories(dir);
  const auto file = (dir / "in.txt").string();
  {
    std::ofstream(file) << "hello\n";
  }
  RunManifest m;
  m.arguments = {"bleu", "--hyp", file};
  m.seed = 5;
  m.config = "{\"a\": 1}";
  m.add_input(file);
  m.set_stat("bleu", "score", "12.5");
  CHECK(m.inputs[0].bytes == 6);
  CHECK(m.inputs[0].hash == hex64(fnv1a64("hello\n")));
  const auto path = (dir / "manifest.json").string();
  m.save_file(path);
  const auto back = RunManifest::load_file(path);
  CHECK(back.to_json() == m.to_json());
  CHECK(back.inputs == m.inputs);
  CHECK(back.stats.at("bleu").at("score") == "12.5");
  CHECK_THROWS_AS(RunManifest::from_json("{}"), Error);
  CHECK_THROWS_AS(hash_file((dir / "missing").string()), Error);
  std::filesystem::remove_all(dir);
}
