#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tagmt/corpus.hpp"
#include "tagmt/neural.hpp"
#include "tagmt/synthdata.hpp"

namespace tagmt::toymt {

// --- synthetic bilingual world ---------------------------------------------

/// Data-generating process for the four origin quadrants. Every concept i
/// has a source word, a literal target word and a target synonym.
struct QuadrantSpec {
  std::size_t source_vocab_size = 50;
  double synonym_probability = 0.5;
  synth::Reorder reorder = synth::Reorder::Reverse;  // natural target order relative to the source
  std::size_t min_length = 4;
  std::size_t max_length = 10;
  std::size_t src_orig_count = 2000;
  std::size_t trg_orig_count = 2000;
  std::size_t zero_shot_count = 200;
  std::size_t trg_orig_test_count = 200;
  std::size_t dev_count = 200;  // half of each training quadrant's style
  std::uint64_t seed = 1;

  void validate() const;
  /// `key = value` lines; '#' comments.
  std::string to_text() const;
  static QuadrantSpec parse(std::istream& in);
  static QuadrantSpec load_file(const std::string& path);
};

struct Lexicon {
  std::vector<std::string> source;   // concept -> source word
  std::vector<std::string> literal;  // concept -> literal target word
  std::vector<std::string> synonym;  // concept -> natural synonym

  /// Source word -> literal target word, and target words (both kinds) -> source word.
  std::map<std::string, std::string> forward() const;
  std::map<std::string, std::string> backward() const;
};

/// Test sentences with a literal (translationese) reference in `pairs[i].target`
/// and, for the zero-shot split, a natural reference.
struct TestSet {
  ParallelCorpus pairs;
  std::vector<std::string> natural_references;  // empty or parallel to pairs
};

struct QuadrantData {
  Lexicon lexicon;
  ParallelCorpus src_orig;  // original source, literal same-order target
  ParallelCorpus trg_orig;  // natural target, source mirrors its order
  ParallelCorpus dev;       // both styles
  TestSet zero_shot;        // original sources; literal and natural references
  ParallelCorpus trg_orig_test;

  /// src_orig followed by trg_orig.
  ParallelCorpus training() const;
};

/// Pseudo-word lexicons from seeded syllables. Throws Error when unique words
/// cannot be drawn (lexicon collision).
Lexicon make_lexicon(std::size_t concepts, std::uint64_t seed);
QuadrantData generate_quadrant_data(const QuadrantSpec& spec);

/// Fraction of concept tokens in `lines` rendered with the synonym rather than
/// the literal word (tokens outside the lexicon are ignored).
double synonym_rate(const std::vector<std::string>& lines, const Lexicon& lexicon);

// --- model ------------------------------------------------------------------

struct ToyMtConfig {
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t max_decode_length = 60;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double ema_decay = 0.99;
  std::size_t epochs = 20;
  std::size_t eval_interval = 125;  // steps
  std::uint64_t seed = 1;

  std::string to_json() const;
  static ToyMtConfig from_json(std::string_view text);
  void validate() const;
};

inline constexpr std::string_view kUnknown = "<unk>";
inline constexpr std::string_view kBegin = "<s>";
inline constexpr std::string_view kEnd = "</s>";

/// Word-level vocabulary shared by both sides. Ids 0..3 are <unk>, <s>, </s>
/// and the tag token.
class Vocabulary {
 public:
  enum : std::uint32_t { kUnk = 0, kBos = 1, kEos = 2, kTag = 3 };

  Vocabulary() = default;
  explicit Vocabulary(const ParallelCorpus& corpus);
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::uint32_t id(std::string_view token) const;
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::vector<std::uint32_t> encode(std::string_view line) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Sequence {
  std::vector<std::uint32_t> source;  // includes the tag id for tagged pairs
  std::vector<std::uint32_t> target;  // without <s>/</s>
};

template <typename T>
void declare_parameters(nn::ParameterSet<T>& params, const ToyMtConfig& config, std::size_t vocab_size);

/// Teacher-forced cross-entropy, averaged over all target tokens of the batch
/// (each sequence contributes its tokens plus </s>).
template <typename T>
double sequence_loss(nn::ParameterSet<T>& params, const ToyMtConfig& config, const std::vector<const Sequence*>& batch,
                     bool with_grad);

class ToyMtModel {
 public:
  ToyMtModel() = default;
  ToyMtModel(ToyMtConfig config, Vocabulary vocab);

  const ToyMtConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  nn::ParameterSet<float>& params() { return params_; }
  const nn::ParameterSet<float>& params() const { return params_; }

  Sequence sequence(const SentencePair& pair) const;
  /// Encoder ids for `source`, with the tag prepended when `natural`.
  std::vector<std::uint32_t> encode_source(std::string_view source, bool natural) const;

  /// Greedy (beam == 1) or beam search; natural mode prepends the tag.
  std::string decode(std::string_view source, bool natural, std::size_t beam = 1) const;
  std::vector<std::uint32_t> decode_ids(const std::vector<std::uint32_t>& source_ids, std::size_t beam = 1) const;

  void save_file(const std::string& path) const;
  static ToyMtModel load_file(const std::string& path);

 private:
  ToyMtConfig config_;
  Vocabulary vocab_;
  nn::ParameterSet<float> params_;
};

struct ToyTrainingLog {
  struct Step {
    std::size_t step;
    double loss;
  };
  struct Evaluation {
    std::size_t step;
    double mean_loss;  // over the steps since the previous evaluation
    double dev_bleu;
  };
  std::vector<Step> steps;
  std::vector<Evaluation> evaluations;
  std::size_t best_evaluation = 0;
  std::vector<std::string> warnings;

  void write_tsv(std::ostream& out) const;
};

struct ToyTrainingResult {
  ToyMtModel model;  // best checkpoint, EMA weights
  ToyTrainingLog log;
};

/// Dev score: BLEU of untagged then tagged decodes of every dev source,
/// against the dev references repeated twice.
double dev_score(const ToyMtModel& model, const ParallelCorpus& dev);

ToyTrainingResult train_toymt(const ParallelCorpus& train, const ParallelCorpus& dev, const ToyMtConfig& config);

}  // namespace tagmt::toymt
