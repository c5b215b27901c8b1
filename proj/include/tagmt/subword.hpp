#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagmt/corpus.hpp"

namespace tagmt::subword {

inline constexpr std::string_view kEndOfWord = "</w>";
/// Suffix on every non-final subword of a word, followed by a space.
inline constexpr std::string_view kContinuation = "@@";
inline constexpr std::size_t kDefaultVocabSize = 32000;

/// Learned byte-pair-encoding model.
///
/// Words are split into Unicode scalars with kEndOfWord attached to the last
/// one; merges are replayed in learned order. Segmented text marks non-final
/// subwords with kContinuation, so removing every "@@ " restores the input
/// exactly for any line that does not itself contain "@@".
class BpeModel {
 public:
  using Merge = std::pair<std::string, std::string>;

  BpeModel() = default;
  BpeModel(std::vector<Merge> merges, std::vector<std::string> reserved, std::size_t target_vocab_size,
           std::set<std::string> base_symbols = {});

  const std::vector<Merge>& merges() const { return merges_; }
  const std::vector<std::string>& reserved() const { return reserved_; }
  std::size_t target_vocab_size() const { return target_vocab_size_; }
  /// Base symbols, merge results and reserved tokens.
  const std::set<std::string>& vocab() const { return vocab_; }
  bool is_reserved(std::string_view token) const;

  /// Segments one line; whitespace runs are preserved verbatim.
  std::string apply(std::string_view line) const;
  /// Subwords of a single whitespace-free word (without markers).
  std::vector<std::string> segment_word(std::string_view word) const;
  /// Number of subword symbols apply() would produce.
  std::size_t count_subwords(std::string_view line) const;

  void save(std::ostream& out) const;
  static BpeModel load(std::istream& in);
  void save_file(const std::string& path) const;
  static BpeModel load_file(const std::string& path);
  /// FNV-1a of the serialized model.
  std::uint64_t fingerprint() const;

 private:
  std::vector<Merge> merges_;
  std::vector<std::string> reserved_;
  std::size_t target_vocab_size_ = kDefaultVocabSize;
  std::set<std::string> base_symbols_;
  std::set<std::string> vocab_;
  std::map<Merge, std::size_t> rank_;
  mutable std::unordered_map<std::string, std::vector<std::string>> cache_;
};

/// Learns merges until the vocabulary (initial symbols + merge results +
/// reserved tokens) reaches target_vocab_size. Equal-frequency pairs are
/// broken by lexicographic order of (left, right). Throws Error if the
/// target is not above the initial inventory or cannot be reached.
BpeModel learn_bpe(const MonoCorpus& lines, std::size_t target_vocab_size,
                   const std::vector<std::string>& reserved = {std::string(kTagToken)});
/// Shared model over both sides of a parallel corpus.
BpeModel learn_bpe(const ParallelCorpus& corpus, std::size_t target_vocab_size,
                   const std::vector<std::string>& reserved = {std::string(kTagToken)});

/// Inverse of BpeModel::apply.
std::string remove_bpe(std::string_view segmented);

}  // namespace tagmt::subword
