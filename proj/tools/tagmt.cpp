// tagmt: command-line front end for the toolkit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tagmt/classifier.hpp"
#include "tagmt/corpus.hpp"
#include "tagmt/harness.hpp"
#include "tagmt/subword.hpp"
#include "tagmt/synthdata.hpp"
#include "tagmt/tagging.hpp"
#include "tagmt/textmetrics.hpp"
#include "tagmt/toymt.hpp"

namespace {

using namespace tagmt;
namespace fs = std::filesystem;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

std::string format_double(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Shared state of one invocation: global flags and the run manifest.
struct Run {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string config_path;
  nlohmann::json config = nlohmann::json::object();
  std::string manifest_path;
  harness::RunManifest manifest;
  std::vector<std::string> outputs;

  void load_config() {
    if (config_path.empty()) return;
    manifest.config = read_text(config_path);
    try {
      config = nlohmann::json::parse(manifest.config);
    } catch (const std::exception& e) {
      throw Error("config '" + config_path + "': " + e.what());
    }
    if (!config.is_object()) throw Error("config '" + config_path + "': expected a JSON object");
  }

  /// JSON text of one config section ("{}" when absent).
  std::string section(const std::string& name) const {
    return config.contains(name) ? config.at(name).dump() : std::string("{}");
  }

  const std::string& input(const std::string& path) {
    manifest.add_input(path);
    return path;
  }
  const std::string& output(const std::string& path) {
    outputs.push_back(path);
    return path;
  }
  void stat(const std::string& stage, const std::string& key, const std::string& value) {
    manifest.set_stat(stage, key, value);
  }

  void finish() {
    if (manifest_path.empty()) return;
    manifest.seed = seed;
    for (const auto& p : outputs) manifest.add_output(p);
    manifest.save_file(manifest_path);
  }
};

// --- translators and policies ---------------------------------------------

/// `identity`, `exec:COMMAND`, or `lexicon=FILE[,reorder=R][,dropout=P][,invert]`.
std::unique_ptr<synth::Translator> make_translator(const std::string& spec, synth::Direction direction, Run& run) {
  if (spec == "identity") return synth::ToyTranslator::identity(direction);
  if (spec.starts_with("exec:")) return std::make_unique<synth::SubprocessTranslator>(direction, spec.substr(5));
  synth::ToyTranslator::Options opt;
  opt.seed = derive_seed(run.seed, "translator." + std::string(synth::to_string(direction)));
  bool invert = false;
  std::string lexicon;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto eq = item.find('=');
    const std::string key = item.substr(0, eq);
    const std::string value = eq == std::string::npos ? "" : item.substr(eq + 1);
    if (key == "lexicon") lexicon = value;
    else if (key == "reorder") opt.reorder = synth::parse_reorder(value);
    else if (key == "dropout") opt.dropout = std::stod(value);
    else if (key == "invert") invert = true;
    else throw Error("translator spec: unknown field '" + key + "' in '" + spec + "'");
  }
  if (lexicon.empty()) throw Error("translator spec '" + spec + "' names no lexicon (or use identity / exec:CMD)");
  opt.lexicon = synth::read_lexicon_file(run.input(lexicon));
  if (invert) opt.lexicon = synth::invert_lexicon(opt.lexicon);
  return std::make_unique<synth::ToyTranslator>(direction, std::move(opt));
}

struct PolicyOptions {
  std::string classifier;
  std::string bpe;
  std::string function_words;
  std::string language = "en";
};

metrics::FunctionWordList function_words(const PolicyOptions& o, Run& run) {
  if (!o.function_words.empty()) return metrics::FunctionWordList::load_file(run.input(o.function_words), o.language);
  return metrics::FunctionWordList::builtin(o.language);
}

/// `name[:parameter]`: classifier[:threshold], length-ratio:rho,
/// lexical-density[:cutoff], all-tagged, untagged, origin-label.
tagging::TagPolicy parse_policy(const std::string& text, const PolicyOptions& o, Run& run) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::optional<double> param;
  if (colon != std::string::npos) {
    try {
      param = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error("policy '" + text + "': bad numeric parameter");
    }
  }
  if (name == "classifier") {
    if (o.classifier.empty() || o.bpe.empty()) throw Error("policy 'classifier' needs --classifier and --bpe");
    auto bpe = subword::BpeModel::load_file(run.input(o.bpe));
    auto model = std::make_shared<classifier::ClassifierModel>(
        classifier::ClassifierModel::load_file(run.input(o.classifier), std::move(bpe)));
    return tagging::policy::Classifier{model, param.value_or(0.5)};
  }
  if (name == "length-ratio") {
    if (!param) throw Error("policy 'length-ratio' needs a threshold, e.g. length-ratio:1.05");
    return tagging::policy::LengthRatio{*param};
  }
  if (name == "lexical-density") return tagging::policy::LexicalDensity{function_words(o, run), param.value_or(0.5)};
  if (name == "all-tagged") return tagging::policy::AllTagged{};
  if (name == "untagged") return tagging::policy::Untagged{};
  if (name == "origin-label") return tagging::policy::OriginLabel{};
  throw Error("unknown policy '" + name + "'");
}

void add_policy_options(CLI::App* cmd, PolicyOptions& o) {
  cmd->add_option("--classifier", o.classifier, "Classifier checkpoint (classifier policy)");
  cmd->add_option("--bpe", o.bpe, "Subword model of the classifier");
  cmd->add_option("--function-words", o.function_words, "Function-word list file (lexical-density policy)");
  cmd->add_option("--lang", o.language, "Built-in function-word list: en, fr, de");
}

corpus::TsvForm parse_form(const std::string& s) {
  if (s == "plain") return corpus::TsvForm::Plain;
  if (s == "tagged") return corpus::TsvForm::Tagged;
  if (s == "inline") return corpus::TsvForm::Inline;
  throw Error("unknown TSV form '" + s + "' (plain, tagged, inline)");
}

classifier::ClassifierConfig classifier_config(Run& run) {
  auto cfg = classifier::ClassifierConfig::from_json(run.section("classifier"));
  if (run.seed_given) cfg.seed = run.seed;
  return cfg;
}

toymt::ToyMtConfig toymt_config(Run& run) {
  auto cfg = toymt::ToyMtConfig::from_json(run.section("toymt"));
  if (run.seed_given) cfg.seed = run.seed;
  return cfg;
}

toymt::QuadrantSpec quadrant_spec(const std::string& path, Run& run) {
  auto spec = path.empty() ? toymt::QuadrantSpec{} : toymt::QuadrantSpec::load_file(run.input(path));
  if (run.seed_given) spec.seed = run.seed;
  run.stat("quadrants", "spec", spec.to_text());
  return spec;
}

void print_filter_stats(const corpus::FilterStats& stats, const std::string& report, Run& run) {
  std::ostringstream out;
  corpus::write_filter_report(out, stats);
  if (!report.empty()) write_text(run.output(report), out.str());
  std::cout << "kept " << stats.kept_count << " of " << stats.input_count << '\n';
  run.stat("filter", "input", std::to_string(stats.input_count));
  run.stat("filter", "kept", std::to_string(stats.kept_count));
}

}  // namespace

int main(int argc, char** argv) {
  Run run;
  CLI::App app{"Tagged-translation toolkit: corpus preparation, translationese classification, tagging and a toy tagged MT"};
  app.require_subcommand(1);
  app.add_option("--seed", run.seed, "Root seed (overrides config and spec seeds)");
  app.add_option("--config", run.config_path, "JSON config with optional \"classifier\" and \"toymt\" sections")
      ->check(CLI::ExistingFile);
  app.add_option("--manifest", run.manifest_path, "Write a run manifest (JSON) here");
  std::function<void()> action;

  // filter
  std::string f_mode = "bitext", f_input, f_output, f_bpe, f_report;
  std::size_t f_max_subwords = 250, f_max_tokens = 0, f_max_chars = 0;
  double f_max_ratio = 2.0;
  auto* filter = app.add_subcommand("filter", "Length and ratio filters for bitext, monolingual or back-translated data");
  filter->add_option("--mode", f_mode, "bitext | mono | bt")->check(CLI::IsMember({"bitext", "mono", "bt"}));
  filter->add_option("--input", f_input)->required();
  filter->add_option("--output", f_output)->required();
  filter->add_option("--bpe", f_bpe, "Subword model (bitext mode)");
  filter->add_option("--max-subwords", f_max_subwords);
  filter->add_option("--max-ratio", f_max_ratio);
  filter->add_option("--max-tokens", f_max_tokens, "Default 70 (mono) / 75 (bt)");
  filter->add_option("--max-chars", f_max_chars, "Default 500 (mono) / 550 (bt)");
  filter->add_option("--report", f_report, "Write rule<TAB>count lines here");
  filter->callback([&] {
    action = [&] {
      if (f_mode == "mono") {
        const auto r = corpus::filter_mono(corpus::read_mono_file(run.input(f_input)), f_max_tokens ? f_max_tokens : 70,
                                           f_max_chars ? f_max_chars : 500);
        corpus::write_mono_file(run.output(f_output), r.items);
        print_filter_stats(r.stats, f_report, run);
        return;
      }
      const auto data = corpus::read_parallel_tsv_file(run.input(f_input));
      corpus::Filtered<SentencePair> r;
      if (f_mode == "bt") {
        r = corpus::filter_backtranslated(data, f_max_tokens ? f_max_tokens : 75, f_max_chars ? f_max_chars : 550);
      } else {
        if (f_bpe.empty()) throw Error("filter --mode bitext needs --bpe for subword counts");
        const auto bpe = subword::BpeModel::load_file(run.input(f_bpe));
        r = corpus::filter_bitext(data, [&](std::string_view l) { return bpe.count_subwords(l); }, f_max_subwords,
                                  f_max_ratio);
      }
      corpus::write_parallel_tsv_file(run.output(f_output), r.items, corpus::TsvForm::Tagged);
      print_filter_stats(r.stats, f_report, run);
    };
  });

  // dedup
  std::string d_input, d_output, d_report;
  bool d_parallel = false;
  auto* dedup = app.add_subcommand("dedup", "Remove exact duplicates, keeping first occurrences");
  dedup->add_option("--input", d_input)->required();
  dedup->add_option("--output", d_output)->required();
  dedup->add_flag("--parallel", d_parallel, "Input is a parallel TSV");
  dedup->add_option("--report", d_report);
  dedup->callback([&] {
    action = [&] {
      if (d_parallel) {
        const auto r = corpus::dedup(corpus::read_parallel_tsv_file(run.input(d_input)));
        corpus::write_parallel_tsv_file(run.output(d_output), r.items, corpus::TsvForm::Tagged);
        print_filter_stats(r.stats, d_report, run);
      } else {
        const auto r = corpus::dedup(corpus::read_mono_file(run.input(d_input)));
        corpus::write_mono_file(run.output(d_output), r.items);
        print_filter_stats(r.stats, d_report, run);
      }
    };
  });

  // learn-bpe
  std::vector<std::string> lb_inputs;
  std::string lb_output;
  std::size_t lb_vocab = 0;
  bool lb_parallel = false;
  auto* learn = app.add_subcommand("learn-bpe", "Learn a subword model");
  learn->add_option("--input", lb_inputs, "Monolingual files (or parallel TSVs with --parallel)")->required();
  learn->add_option("--vocab-size", lb_vocab, "Target vocabulary size")->required();
  learn->add_option("--output", lb_output)->required();
  learn->add_flag("--parallel", lb_parallel, "Inputs are parallel TSVs; both sides are used");
  learn->callback([&] {
    action = [&] {
      MonoCorpus lines;
      for (const auto& path : lb_inputs) {
        if (lb_parallel) {
          for (const auto& p : corpus::read_parallel_tsv_file(run.input(path))) {
            lines.push_back(p.source);
            lines.push_back(p.target);
          }
        } else {
          const auto m = corpus::read_mono_file(run.input(path));
          lines.insert(lines.end(), m.begin(), m.end());
        }
      }
      const auto model = subword::learn_bpe(lines, lb_vocab);
      model.save_file(run.output(lb_output));
      std::cout << model.merges().size() << " merges, vocabulary " << model.vocab().size() << '\n';
      run.stat("learn-bpe", "merges", std::to_string(model.merges().size()));
    };
  });

  // apply-bpe
  std::string ab_model, ab_input, ab_output;
  bool ab_remove = false;
  auto* apply = app.add_subcommand("apply-bpe", "Segment lines with a subword model, or undo segmentation");
  apply->add_option("--model", ab_model, "Subword model (not needed with --remove)");
  apply->add_option("--input", ab_input)->required();
  apply->add_option("--output", ab_output)->required();
  apply->add_flag("--remove", ab_remove, "Join subwords back into words");
  apply->callback([&] {
    action = [&] {
      auto lines = corpus::read_mono_file(run.input(ab_input));
      if (ab_remove) {
        for (auto& l : lines) l = subword::remove_bpe(l);
      } else {
        if (ab_model.empty()) throw Error("apply-bpe needs --model");
        const auto model = subword::BpeModel::load_file(run.input(ab_model));
        for (auto& l : lines) l = model.apply(l);
      }
      corpus::write_mono_file(run.output(ab_output), lines);
    };
  });

  // build-ft / build-rtt
  std::string ft_source, ft_target, ft_translator, ft_output;
  std::size_t ft_batch = 1000;
  auto* build_ft = app.add_subcommand("build-ft", "Labeled data from forward translations of source text");
  build_ft->add_option("--source", ft_source, "Source-language monolingual file")->required();
  build_ft->add_option("--target", ft_target, "Target-language monolingual file")->required();
  build_ft->add_option("--translator", ft_translator,
                       "identity | exec:COMMAND | lexicon=FILE[,reorder=R][,dropout=P][,invert]")
      ->required();
  build_ft->add_option("--output", ft_output, "Labeled TSV")->required();
  build_ft->add_option("--batch", ft_batch);
  build_ft->callback([&] {
    action = [&] {
      auto s2t = make_translator(ft_translator, synth::Direction::SourceToTarget, run);
      const auto d = synth::build_ft_dataset(corpus::read_mono_file(run.input(ft_source)),
                                             corpus::read_mono_file(run.input(ft_target)), *s2t, ft_batch);
      corpus::write_labeled_file(run.output(ft_output), d.sentences);
      std::cout << d.sentences.size() << " labeled sentences\n";
      run.stat("build-ft", "sentences", std::to_string(d.sentences.size()));
    };
  });

  std::string rtt_target, rtt_back, rtt_forward, rtt_output, rtt_intermediate;
  std::size_t rtt_batch = 1000;
  auto* build_rtt = app.add_subcommand("build-rtt", "Labeled data from round-trip translations of target text");
  build_rtt->add_option("--target", rtt_target, "Target-language monolingual file")->required();
  build_rtt->add_option("--backward", rtt_back, "Target-to-source translator spec")->required();
  build_rtt->add_option("--forward", rtt_forward, "Source-to-target translator spec")->required();
  build_rtt->add_option("--output", rtt_output, "Labeled TSV")->required();
  build_rtt->add_option("--intermediate", rtt_intermediate, "Also write the source-language pivot text here");
  build_rtt->add_option("--batch", rtt_batch);
  build_rtt->callback([&] {
    action = [&] {
      auto t2s = make_translator(rtt_back, synth::Direction::TargetToSource, run);
      auto s2t = make_translator(rtt_forward, synth::Direction::SourceToTarget, run);
      const auto d = synth::build_rtt_dataset(corpus::read_mono_file(run.input(rtt_target)), *t2s, *s2t, rtt_batch,
                                              !rtt_intermediate.empty());
      corpus::write_labeled_file(run.output(rtt_output), d.sentences);
      if (!rtt_intermediate.empty()) corpus::write_mono_file(run.output(rtt_intermediate), d.intermediate);
      std::cout << d.sentences.size() << " labeled sentences\n";
      run.stat("build-rtt", "sentences", std::to_string(d.sentences.size()));
    };
  });

  // train-classifier
  std::string tc_train, tc_dev, tc_bpe, tc_output, tc_log;
  auto* train_cls = app.add_subcommand("train-classifier", "Train the translationese classifier");
  train_cls->add_option("--train", tc_train, "Labeled TSV")->required();
  train_cls->add_option("--dev", tc_dev, "Labeled TSV")->required();
  train_cls->add_option("--bpe", tc_bpe, "Subword model")->required();
  train_cls->add_option("--output", tc_output, "Checkpoint")->required();
  train_cls->add_option("--log", tc_log, "Training log TSV");
  train_cls->callback([&] {
    action = [&] {
      const auto cfg = classifier_config(run);
      auto r = classifier::train_classifier(corpus::read_labeled_file(run.input(tc_train)),
                                            corpus::read_labeled_file(run.input(tc_dev)), cfg,
                                            subword::BpeModel::load_file(run.input(tc_bpe)));
      r.model.save_file(run.output(tc_output));
      if (!tc_log.empty()) {
        std::ostringstream out;
        r.log.write_tsv(out);
        write_text(run.output(tc_log), out.str());
      }
      const auto& best = r.log.evaluations.at(r.log.best_evaluation);
      std::cout << "best dev F1 " << format_double(best.dev.f1, 4) << " at step " << best.step << '\n';
      run.stat("train-classifier", "best_dev_f1", format_double(best.dev.f1, 6));
      run.stat("train-classifier", "config", cfg.to_json());
    };
  });

  // classify / eval-classifier
  std::string cl_model, cl_bpe, cl_input, cl_output;
  double cl_threshold = 0.5;
  auto* classify = app.add_subcommand("classify", "Write probability<TAB>label per input line");
  classify->add_option("--model", cl_model)->required();
  classify->add_option("--bpe", cl_bpe)->required();
  classify->add_option("--input", cl_input)->required();
  classify->add_option("--output", cl_output)->required();
  classify->add_option("--threshold", cl_threshold, "Probability above which a line is labeled original");
  classify->callback([&] {
    action = [&] {
      const auto model =
          classifier::ClassifierModel::load_file(run.input(cl_model), subword::BpeModel::load_file(run.input(cl_bpe)));
      std::ostringstream out;
      std::size_t original = 0, n = 0;
      for (const auto& line : corpus::read_mono_file(run.input(cl_input))) {
        const double p = model.predict(line);
        const bool is_original = p > cl_threshold;
        original += is_original;
        ++n;
        out << format_double(p, 6) << '\t' << to_string(is_original ? Label::Original : Label::Translated) << '\n';
      }
      write_text(run.output(cl_output), out.str());
      std::cout << original << " of " << n << " lines labeled original\n";
    };
  });

  std::string ec_model, ec_bpe, ec_test;
  double ec_threshold = 0.5;
  auto* eval_cls = app.add_subcommand("eval-classifier", "Precision, recall and F1 (original is positive)");
  eval_cls->add_option("--model", ec_model)->required();
  eval_cls->add_option("--bpe", ec_bpe)->required();
  eval_cls->add_option("--test", ec_test, "Labeled TSV")->required();
  eval_cls->add_option("--threshold", ec_threshold);
  eval_cls->callback([&] {
    action = [&] {
      const auto model =
          classifier::ClassifierModel::load_file(run.input(ec_model), subword::BpeModel::load_file(run.input(ec_bpe)));
      const auto s = classifier::evaluate(model, corpus::read_labeled_file(run.input(ec_test)), ec_threshold);
      std::cout << "precision\t" << format_double(s.precision, 4) << "\nrecall\t" << format_double(s.recall, 4)
                << "\nf1\t" << format_double(s.f1, 4) << "\ntp\t" << s.tp << "\nfp\t" << s.fp << "\nfn\t" << s.fn
                << "\ntn\t" << s.tn << '\n';
      run.stat("eval-classifier", "f1", format_double(s.f1, 6));
    };
  });

  // length-threshold
  std::string lt_x, lt_y;
  auto* length = app.add_subcommand("length-threshold", "Ratio of mean sentence lengths of two monolingual corpora");
  length->add_option("--source-mono", lt_x, "Source-language monolingual file")->required();
  length->add_option("--target-mono", lt_y, "Target-language monolingual file")->required();
  length->callback([&] {
    action = [&] {
      const double rho = tagging::compute_length_threshold(corpus::read_mono_file(run.input(lt_x)),
                                                           corpus::read_mono_file(run.input(lt_y)));
      std::cout << format_double(rho, 6) << '\n';
      run.stat("length-threshold", "rho", format_double(rho, 6));
    };
  });

  // tag
  std::string tg_input, tg_output, tg_policy, tg_form = "tagged";
  PolicyOptions tg_opts;
  auto* tag = app.add_subcommand("tag", "Tag bitext pairs predicted to have an original target");
  tag->add_option("--input", tg_input, "Parallel TSV")->required();
  tag->add_option("--output", tg_output)->required();
  tag->add_option("--policy", tg_policy,
                  "classifier[:t] | length-ratio:rho | lexical-density[:c] | all-tagged | untagged | origin-label")
      ->required();
  tag->add_option("--form", tg_form, "Output form: tagged | inline | plain");
  add_policy_options(tag, tg_opts);
  tag->callback([&] {
    action = [&] {
      const auto policy = parse_policy(tg_policy, tg_opts, run);
      const auto r = tagging::apply_policy(corpus::read_parallel_tsv_file(run.input(tg_input)), policy);
      corpus::write_parallel_tsv_file(run.output(tg_output), r.corpus, parse_form(tg_form));
      std::cout << r.stats.format() << '\n';
      run.stat("tag", "policy", tagging::describe(policy));
      run.stat("tag", "stats", r.stats.format());
    };
  });

  // upsample
  std::string up_input, up_output, up_form = "tagged";
  auto* upsample = app.add_subcommand("upsample", "Replicate the smaller of the tagged/untagged subsets to balance them");
  upsample->add_option("--input", up_input, "Tagged parallel TSV")->required();
  upsample->add_option("--output", up_output)->required();
  upsample->add_option("--form", up_form);
  upsample->callback([&] {
    action = [&] {
      const auto out = tagging::upsample_balance(corpus::read_parallel_tsv_file(run.input(up_input)));
      corpus::write_parallel_tsv_file(run.output(up_output), out, parse_form(up_form));
      const auto s = tagging::count_tags(out);
      std::cout << s.format() << '\n';
      run.stat("upsample", "stats", s.format());
    };
  });

  // merge-bt
  std::string mb_bitext, mb_bt, mb_output, mb_policy = "all-tagged", mb_form = "tagged";
  PolicyOptions mb_opts;
  auto* merge = app.add_subcommand("merge-bt", "Append back-translated pairs, tagged by a policy");
  merge->add_option("--bitext", mb_bitext, "Tagged parallel TSV")->required();
  merge->add_option("--bt", mb_bt, "Back-translated parallel TSV")->required();
  merge->add_option("--output", mb_output)->required();
  merge->add_option("--policy", mb_policy, "Policy for the back-translated pairs");
  merge->add_option("--form", mb_form);
  add_policy_options(merge, mb_opts);
  merge->callback([&] {
    action = [&] {
      const auto policy = parse_policy(mb_policy, mb_opts, run);
      const auto m = tagging::merge_bt(corpus::read_parallel_tsv_file(run.input(mb_bitext)),
                                       corpus::read_parallel_tsv_file(run.input(mb_bt)), policy);
      corpus::write_parallel_tsv_file(run.output(mb_output), m.corpus, parse_form(mb_form));
      std::cout << "bitext " << m.bitext.format() << "\nback-translated " << m.back_translated.format()
                << "\ncombined " << m.combined.format() << '\n';
      run.stat("merge-bt", "combined", m.combined.format());
    };
  });

  // metrics
  std::string mt_hyp, mt_source, mt_ref, mt_fw, mt_lang = "en";
  bool mt_json = false;
  auto* metrics_cmd = app.add_subcommand("metrics", "Lexical variety, lexical density, length variety (and BLEU)");
  metrics_cmd->add_option("--hyp", mt_hyp, "Output text")->required();
  metrics_cmd->add_option("--source", mt_source, "Aligned source text (for length variety)")->required();
  metrics_cmd->add_option("--ref", mt_ref, "Reference text (adds BLEU)");
  metrics_cmd->add_option("--function-words", mt_fw);
  metrics_cmd->add_option("--lang", mt_lang);
  metrics_cmd->add_flag("--json", mt_json);
  metrics_cmd->callback([&] {
    action = [&] {
      const auto fw = function_words({"", "", mt_fw, mt_lang}, run);
      const auto hyps = corpus::read_mono_file(run.input(mt_hyp));
      std::optional<MonoCorpus> refs;
      if (!mt_ref.empty()) refs = corpus::read_mono_file(run.input(mt_ref));
      const auto r = metrics::measure(hyps, corpus::read_mono_file(run.input(mt_source)), fw, refs ? &*refs : nullptr);
      std::cout << (mt_json ? metrics::to_json(r) + "\n" : metrics::to_key_value(r));
    };
  });

  // bleu
  std::string bl_hyp, bl_ref;
  auto* bleu = app.add_subcommand("bleu", "Corpus BLEU with the standard signature");
  bleu->add_option("--hyp", bl_hyp)->required();
  bleu->add_option("--ref", bl_ref)->required();
  bleu->callback([&] {
    action = [&] {
      const auto r = metrics::corpus_bleu(corpus::read_mono_file(run.input(bl_hyp)),
                                          corpus::read_mono_file(run.input(bl_ref)));
      const auto line = metrics::format_bleu(r, metrics::bleu_signature({}));
      std::cout << line << '\n';
      run.stat("bleu", "score", format_double(r.score, 2));
    };
  });

  // gen-quadrants
  std::string gq_spec, gq_dir;
  auto* gen = app.add_subcommand("gen-quadrants", "Generate the synthetic quadrant corpora");
  gen->add_option("--spec", gq_spec, "Quadrant spec file (key = value); defaults otherwise");
  gen->add_option("--output-dir", gq_dir)->required();
  gen->callback([&] {
    action = [&] {
      const auto spec = quadrant_spec(gq_spec, run);
      const auto d = toymt::generate_quadrant_data(spec);
      fs::create_directories(gq_dir);
      auto path = [&](const char* name) { return run.output((fs::path(gq_dir) / name).string()); };
      write_text(path("spec.txt"), spec.to_text());
      corpus::write_parallel_tsv_file(path("src_orig.tsv"), d.src_orig);
      corpus::write_parallel_tsv_file(path("trg_orig.tsv"), d.trg_orig);
      corpus::write_parallel_tsv_file(path("dev.tsv"), d.dev);
      corpus::write_parallel_tsv_file(path("zero_shot.tsv"), d.zero_shot.pairs);
      corpus::write_mono_file(path("zero_shot.natural.txt"), d.zero_shot.natural_references);
      corpus::write_parallel_tsv_file(path("trg_orig_test.tsv"), d.trg_orig_test);
      std::ostringstream lex;
      for (std::size_t i = 0; i < d.lexicon.source.size(); ++i) {
        lex << d.lexicon.source[i] << '\t' << d.lexicon.literal[i] << '\t' << d.lexicon.synonym[i] << '\n';
      }
      write_text(path("lexicon.tsv"), lex.str());
      std::cout << "wrote " << d.src_orig.size() + d.trg_orig.size() << " training pairs to " << gq_dir << '\n';
    };
  });

  // toy-train
  std::string tt_train, tt_dev, tt_output, tt_log;
  auto* toy_train = app.add_subcommand("toy-train", "Train the toy tagged translation model");
  toy_train->add_option("--train", tt_train, "Tagged parallel TSV")->required();
  toy_train->add_option("--dev", tt_dev, "Parallel TSV")->required();
  toy_train->add_option("--output", tt_output, "Checkpoint")->required();
  toy_train->add_option("--log", tt_log, "Training log TSV");
  toy_train->callback([&] {
    action = [&] {
      const auto cfg = toymt_config(run);
      const auto r = toymt::train_toymt(corpus::read_parallel_tsv_file(run.input(tt_train)),
                                        corpus::read_parallel_tsv_file(run.input(tt_dev)), cfg);
      for (const auto& w : r.log.warnings) std::cerr << "warning: " << w << '\n';
      r.model.save_file(run.output(tt_output));
      if (!tt_log.empty()) {
        std::ostringstream out;
        r.log.write_tsv(out);
        write_text(run.output(tt_log), out.str());
      }
      const auto& best = r.log.evaluations.at(r.log.best_evaluation);
      std::cout << "best dev BLEU " << format_double(best.dev_bleu, 2) << " at step " << best.step << '\n';
      run.stat("toy-train", "best_dev_bleu", format_double(best.dev_bleu, 4));
      run.stat("toy-train", "model_checksum", hex64(r.model.params().checksum()));
      run.stat("toy-train", "config", cfg.to_json());
    };
  });

  // toy-decode
  std::string td_model, td_input, td_output;
  bool td_natural = false;
  std::size_t td_beam = 1;
  auto* toy_decode = app.add_subcommand("toy-decode", "Translate raw source lines with the toy model");
  toy_decode->add_option("--model", td_model)->required();
  toy_decode->add_option("--input", td_input)->required();
  toy_decode->add_option("--output", td_output)->required();
  toy_decode->add_flag("--natural", td_natural, "Natural-text mode (prepends the tag); default translationese");
  toy_decode->add_option("--beam", td_beam);
  toy_decode->callback([&] {
    action = [&] {
      const auto model = toymt::ToyMtModel::load_file(run.input(td_model));
      MonoCorpus out;
      for (const auto& line : corpus::read_mono_file(run.input(td_input))) {
        out.push_back(model.decode(line, td_natural, td_beam));
      }
      corpus::write_mono_file(run.output(td_output), out);
    };
  });

  // grid-eval
  std::string ge_model, ge_test, ge_natural, ge_json, ge_fw, ge_lang = "en";
  std::size_t ge_beam = 1;
  auto* grid = app.add_subcommand("grid-eval", "Evaluate both decode modes on both test halves");
  grid->add_option("--model", ge_model)->required();
  grid->add_option("--test", ge_test, "Parallel TSV with origin labels")->required();
  grid->add_option("--natural-refs", ge_natural, "Second reference per test pair");
  grid->add_option("--json", ge_json, "Also write the report as JSON");
  grid->add_option("--beam", ge_beam);
  grid->add_option("--function-words", ge_fw);
  grid->add_option("--lang", ge_lang);
  grid->callback([&] {
    action = [&] {
      const auto model = toymt::ToyMtModel::load_file(run.input(ge_model));
      harness::GridTestSet test{corpus::read_parallel_tsv_file(run.input(ge_test)), {}};
      if (!ge_natural.empty()) test.natural_references = corpus::read_mono_file(run.input(ge_natural));
      harness::GridOptions opt{function_words({"", "", ge_fw, ge_lang}, run), ge_beam, "model", run.seed};
      const auto r = harness::run_grid_eval(model, test, opt);
      std::cout << r.to_text();
      if (!ge_json.empty()) write_text(run.output(ge_json), r.to_json());
      run.stat("grid-eval", "combined_bleu", format_double(r.combined_bleu, 4));
    };
  });

  // compare-policies
  std::string cp_spec, cp_json;
  std::vector<std::string> cp_policies;
  PolicyOptions cp_opts;
  auto* compare = app.add_subcommand("compare-policies", "Train one toy model per tagging policy and compare grids");
  compare->add_option("--spec", cp_spec, "Quadrant spec file");
  compare->add_option("--policy", cp_policies, "Policy (repeat; at least two)")->required();
  compare->add_option("--json", cp_json, "Also write the comparison as JSON");
  add_policy_options(compare, cp_opts);
  compare->callback([&] {
    action = [&] {
      const auto spec = quadrant_spec(cp_spec, run);
      std::vector<tagging::TagPolicy> policies;
      for (const auto& p : cp_policies) policies.push_back(parse_policy(p, cp_opts, run));
      harness::GridOptions opt;
      opt.function_words = function_words(cp_opts, run);
      const auto cmp = harness::compare_policies(spec, policies, toymt_config(run), opt);
      std::cout << cmp.to_text();
      if (!cp_json.empty()) write_text(run.output(cp_json), cmp.to_json());
      for (const auto& r : cmp.runs) run.stat("compare-policies", r.policy, r.stats.format());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "tagmt: " << e.what() << '\n';
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }
  try {
    run.seed_given = app.count("--seed") > 0;
    for (int i = 1; i < argc; ++i) run.manifest.arguments.emplace_back(argv[i]);
    run.load_config();
    action();
    run.finish();
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "tagmt: error: " << msg << '\n';
    return 1;
  }
  return 0;
}
