#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tagmt/corpus.hpp"

namespace tagmt::synth {

enum class Direction { SourceToTarget, TargetToSource };

std::string_view to_string(Direction d);

/// Line-based translation contract: same number of lines out as in, in order.
class Translator {
 public:
  explicit Translator(Direction direction) : direction_(direction) {}
  virtual ~Translator() = default;
  Direction direction() const { return direction_; }
  virtual std::vector<std::string> translate(const std::vector<std::string>& lines) = 0;

 private:
  Direction direction_;
};

enum class Reorder { None, Reverse, SwapPairs };

Reorder parse_reorder(std::string_view name);
std::string_view to_string(Reorder r);

/// Word-for-word lexicon substitution, then reordering, then word dropout.
/// Tokens missing from the lexicon pass through unchanged. Dropout is seeded
/// from the line text, so a line translates the same way in any batch.
class ToyTranslator : public Translator {
 public:
  struct Options {
    std::map<std::string, std::string> lexicon;
    Reorder reorder = Reorder::None;
    double dropout = 0;
    std::uint64_t seed = 1;
  };

  ToyTranslator(Direction direction, Options options);
  std::vector<std::string> translate(const std::vector<std::string>& lines) override;
  std::string translate_line(std::string_view line) const;

  /// Identity "translator": copies its input.
  static std::unique_ptr<ToyTranslator> identity(Direction direction);

 private:
  Options options_;
};

/// Lexicon file: one `from<TAB>to` entry per line; '#' starts a comment.
std::map<std::string, std::string> read_lexicon(std::istream& in);
std::map<std::string, std::string> read_lexicon_file(const std::string& path);
/// Swaps sides; many-to-one entries keep the lexicographically first source.
std::map<std::string, std::string> invert_lexicon(const std::map<std::string, std::string>& lexicon);

/// Runs an external command once per batch: lines on stdin, translations on
/// stdout, strictly one per line. A non-zero exit status is an error.
class SubprocessTranslator : public Translator {
 public:
  SubprocessTranslator(Direction direction, std::string command);
  std::vector<std::string> translate(const std::vector<std::string>& lines) override;

 private:
  std::string command_;
};

/// Splits `lines` into batches, translates each and checks the line count
/// (the error names the offending batch).
std::vector<std::string> translate_batched(Translator& translator, const std::vector<std::string>& lines,
                                           std::size_t batch_size = 1000);

struct Provenance {
  std::size_t index;   // line number (0-based) in the corpus it came from
  std::string corpus;  // "source_mono" or "target_mono"
};

struct LabeledDataset {
  LabeledCorpus sentences;
  std::vector<Provenance> provenance;  // parallel to sentences
  std::vector<std::string> intermediate;  // RTT source-language text, when kept
};

/// min(|src|, |trg|) sentences per class: translations of source lines are
/// Translated, target lines are Original. Pairs are interleaved.
LabeledDataset build_ft_dataset(const MonoCorpus& source_mono, const MonoCorpus& target_mono,
                                Translator& source_to_target, std::size_t batch_size = 1000);

/// Each target line y yields (y, Original) and (s2t(t2s(y)), Translated).
LabeledDataset build_rtt_dataset(const MonoCorpus& target_mono, Translator& target_to_source,
                                 Translator& source_to_target, std::size_t batch_size = 1000,
                                 bool keep_intermediate = false);

}  // namespace tagmt::synth
