#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tagmt/corpus.hpp"

namespace tagmt::metrics {

/// Closed-class words of one language. A content word is any token that is
/// not in this list (compared lowercased) and contains at least one letter.
class FunctionWordList {
 public:
  FunctionWordList(std::string language, std::set<std::string> words);

  const std::string& language() const { return language_; }
  const std::set<std::string>& words() const { return words_; }
  bool is_function_word(std::string_view token) const;
  bool is_content_word(std::string_view token) const;

  /// One token per line; '#' starts a comment; blank lines ignored.
  static FunctionWordList parse(std::istream& in, std::string language);
  static FunctionWordList load_file(const std::string& path, std::string language);
  /// Shipped lists: "en", "fr", "de".
  static FunctionWordList builtin(std::string_view language);

 private:
  std::string language_;
  std::set<std::string> words_;
};

// All three metrics tokenize raw text on whitespace.

/// Type-token ratio over the concatenation of all lines.
double lexical_variety(const std::vector<std::string>& lines);
/// Mean per-line type-token ratio over lines that have tokens.
double lexical_variety_sentence_averaged(const std::vector<std::string>& lines);
double lexical_density(const std::vector<std::string>& lines, const FunctionWordList& fw);
/// Mean of ||x| - |y|| / |x| over aligned (source, output) lines.
double length_variety(const std::vector<std::string>& sources, const std::vector<std::string>& outputs);
double length_variety(const ParallelCorpus& pairs);

struct MetricReport {
  double lexical_variety = 0;
  double lexical_density = 0;
  double length_variety = 0;
  std::optional<double> bleu;
  std::size_t token_count = 0;
  std::size_t type_count = 0;
};

/// Computes all metrics of `outputs`; length variety against `sources`, BLEU
/// against `references` when given.
MetricReport measure(const std::vector<std::string>& outputs, const std::vector<std::string>& sources,
                     const FunctionWordList& fw, const std::vector<std::string>* references = nullptr);

/// `key<TAB>value` lines.
std::string to_key_value(const MetricReport& report);
std::string to_json(const MetricReport& report);

// --- BLEU ---------------------------------------------------------------

inline constexpr std::string_view kBleuVersion = "1.2.15";

struct BleuConfig {
  int max_ngram_order = 4;
  // case.mixed, tok.intl, smooth.exp and a single reference are fixed.
};

struct BleuResult {
  double score = 0;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> totals;
  std::vector<double> precisions;  // percentages
  double brevity_penalty = 1;
  std::size_t sys_len = 0;
  std::size_t ref_len = 0;
};

/// International tokenization: spaces around punctuation not adjacent to
/// digits and around every symbol; outer whitespace stripped.
std::string tokenize_intl(std::string_view line);

/// Corpus BLEU with exponential smoothing. Throws Error on length mismatch,
/// empty input or all-empty hypotheses.
BleuResult corpus_bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                       const BleuConfig& cfg = {});

std::string bleu_signature(const BleuConfig& cfg, std::string_view langpair = {}, std::string_view test_set = {});
/// `BLEU+<signature> = 34.56 p1/p2/p3/p4 (BP = ... ratio = ... hyp_len = ... ref_len = ...)`
std::string format_bleu(const BleuResult& result, std::string_view signature);

}  // namespace tagmt::metrics
