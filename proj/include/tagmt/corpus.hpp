#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tagmt {

/// Reserved token marking pairs whose target side is (predicted) original.
inline constexpr std::string_view kTagToken = "<TRG_ORIG>";

enum class Origin { Unknown, SourceOriginal, TargetOriginal };

std::string_view to_string(Origin origin);
Origin parse_origin(std::string_view text);

struct SentencePair {
  std::string source;
  std::string target;
  Origin origin = Origin::Unknown;
  bool tagged = false;

  bool operator==(const SentencePair&) const = default;
};

using MonoCorpus = std::vector<std::string>;
using ParallelCorpus = std::vector<SentencePair>;

/// Whether a target-language sentence was written in the language or translated into it.
enum class Label { Original, Translated };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct LabeledSentence {
  std::string text;
  Label label = Label::Original;

  bool operator==(const LabeledSentence&) const = default;
};

using LabeledCorpus = std::vector<LabeledSentence>;

}  // namespace tagmt

namespace tagmt::corpus {

struct FilterStats {
  std::size_t input_count = 0;
  std::size_t kept_count = 0;
  std::map<std::string, std::size_t> dropped_by_rule;

  std::size_t dropped() const;
  /// kept + dropped == input.
  bool reconciles() const { return kept_count + dropped() == input_count; }
};

template <typename Item>
struct Filtered {
  std::vector<Item> items;
  FilterStats stats;
};

/// Exact-duplicate removal, first occurrence wins. Pairs compare on
/// (source, target).
Filtered<std::string> dedup(const MonoCorpus& corpus);
Filtered<SentencePair> dedup(const ParallelCorpus& corpus);

/// Counts subword tokens of one line.
using SubwordCounter = std::function<std::size_t(std::string_view)>;

/// Drops pairs with either side longer than max_subwords, then pairs whose
/// symmetric length ratio max/min exceeds max_ratio (both in subwords).
/// Throws Error on a pair with an empty side.
Filtered<SentencePair> filter_bitext(const ParallelCorpus& corpus, const SubwordCounter& count,
                                     std::size_t max_subwords = 250, double max_ratio = 2.0);

/// Drops lines with more than max_tokens whitespace tokens or more than
/// max_chars Unicode scalars.
Filtered<std::string> filter_mono(const MonoCorpus& corpus, std::size_t max_tokens = 70,
                                  std::size_t max_chars = 500);

/// Same bounds applied to the synthetic source side of back-translated pairs.
Filtered<SentencePair> filter_backtranslated(const ParallelCorpus& corpus,
                                             std::size_t max_src_tokens = 75,
                                             std::size_t max_src_chars = 550);

using LanguagePredicate = std::function<bool(std::string_view)>;

/// Keeps pairs whose sides satisfy the language predicates and differ.
Filtered<SentencePair> filter_language(const ParallelCorpus& corpus, const LanguagePredicate& src_pred,
                                       const LanguagePredicate& trg_pred);

/// Naive-Bayes character-unigram language identifier.
class CharProfileIdentifier {
 public:
  void add_language(std::string name, const MonoCorpus& sample);
  /// Name of the most likely language; throws if no language was added.
  const std::string& identify(std::string_view text) const;
  LanguagePredicate predicate_for(const std::string& name) const;
  std::size_t language_count() const { return profiles_.size(); }

 private:
  struct Profile {
    std::string name;
    std::map<char32_t, double> log_prob;
    double unseen_log_prob = 0;
  };
  std::vector<Profile> profiles_;
};

// I/O. Monolingual files: UTF-8, one sentence per line. Parallel TSV:
// source<TAB>target[<TAB>origin[<TAB>tag]]; a source starting with the tag
// token is read as tagged with the token stripped.
MonoCorpus read_mono(std::istream& in);
MonoCorpus read_mono_file(const std::string& path);
void write_mono(std::ostream& out, const MonoCorpus& corpus);
void write_mono_file(const std::string& path, const MonoCorpus& corpus);

ParallelCorpus read_parallel_tsv(std::istream& in);
ParallelCorpus read_parallel_tsv_file(const std::string& path);
ParallelCorpus read_parallel_files(const std::string& source_path, const std::string& target_path);

enum class TsvForm {
  Plain,     // source, target, origin
  Tagged,    // source, target, origin, tag bit
  Inline,    // tag token prepended to the source of tagged pairs; source, target, origin
};
void write_parallel_tsv(std::ostream& out, const ParallelCorpus& corpus, TsvForm form = TsvForm::Plain);
void write_parallel_tsv_file(const std::string& path, const ParallelCorpus& corpus,
                             TsvForm form = TsvForm::Plain);

// Labeled files: label<TAB>text with label in {original, translated}.
LabeledCorpus read_labeled(std::istream& in);
LabeledCorpus read_labeled_file(const std::string& path);
void write_labeled(std::ostream& out, const LabeledCorpus& corpus);
void write_labeled_file(const std::string& path, const LabeledCorpus& corpus);

/// `rule<TAB>count` per line, starting with input and kept.
void write_filter_report(std::ostream& out, const FilterStats& stats);

/// Throws Error if a side is empty after trimming or contains a tab/newline.
void validate(const SentencePair& pair, std::size_t line_number = 0);

}  // namespace tagmt::corpus
