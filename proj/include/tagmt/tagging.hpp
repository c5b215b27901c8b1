#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <variant>

#include "tagmt/classifier.hpp"
#include "tagmt/corpus.hpp"
#include "tagmt/textmetrics.hpp"

namespace tagmt::tagging {

namespace policy {

/// Tag when the classifier's probability-original exceeds the threshold.
struct Classifier {
  std::shared_ptr<const classifier::ClassifierModel> model;
  double threshold = 0.5;
};
/// Tag when source tokens / target tokens exceeds rho.
struct LengthRatio {
  double rho = 1.0;
};
/// Tag when the target's lexical density exceeds the cutoff.
struct LexicalDensity {
  metrics::FunctionWordList function_words;
  double cutoff = 0.5;
};
struct AllTagged {};
struct Untagged {};
/// Tag exactly the pairs whose origin label is target-original.
struct OriginLabel {};

}  // namespace policy

using TagPolicy = std::variant<policy::Classifier, policy::LengthRatio, policy::LexicalDensity, policy::AllTagged,
                               policy::Untagged, policy::OriginLabel>;

/// Short name, e.g. "length-ratio(0.8643)".
std::string describe(const TagPolicy& policy);
/// Throws Error for non-finite thresholds or a classifier policy without a model.
void validate(const TagPolicy& policy);

struct TagStats {
  std::size_t total = 0;
  std::size_t tagged = 0;

  double fraction_tagged() const { return total ? static_cast<double>(tagged) / static_cast<double>(total) : 0.0; }
  /// `total / tagged / fraction`
  std::string format() const;
};

TagStats count_tags(const ParallelCorpus& corpus);

/// Mean whitespace-token count of `mono_x` lines over that of `mono_y`.
double compute_length_threshold(const MonoCorpus& mono_x, const MonoCorpus& mono_y);

/// Decision for a single pair.
bool decide(const SentencePair& pair, const TagPolicy& policy);

struct Tagged {
  ParallelCorpus corpus;
  TagStats stats;
};

/// Overwrites every pair's tag bit with the policy's decision.
Tagged apply_policy(const ParallelCorpus& corpus, const TagPolicy& policy);

/// Replicates the smaller of the tagged/untagged subsets (whole copies, then
/// a prefix in corpus order) and appends the replicas, so both subsets end up
/// the same size. Throws Error if either subset is empty.
ParallelCorpus upsample_balance(const ParallelCorpus& corpus);

struct Merged {
  ParallelCorpus corpus;  // bitext followed by back-translated pairs
  TagStats bitext;
  TagStats back_translated;
  TagStats combined;
};

/// Tags the back-translated corpus with `bt_policy` and appends it to the
/// already tagged bitext.
Merged merge_bt(const ParallelCorpus& bitext, const ParallelCorpus& back_translated, const TagPolicy& bt_policy);

}  // namespace tagmt::tagging
