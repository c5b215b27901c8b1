#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tagmt/corpus.hpp"
#include "tagmt/neural.hpp"
#include "tagmt/subword.hpp"

namespace tagmt::classifier {

struct ClassifierConfig {
  std::size_t embedding_dim = 64;
  std::vector<std::size_t> widths = {3, 4, 5};  // one convolution layer per entry, stacked
  std::size_t filters = 64;
  double dropout = 0.1;  // on the pooled features, training only
  std::size_t max_tokens = 256;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  std::size_t epochs = 5;
  std::size_t eval_interval = 50;  // steps between dev evaluations
  std::uint64_t seed = 1;

  std::string to_json() const;
  static ClassifierConfig from_json(std::string_view text);
  void validate() const;
};

/// Confusion counts with Original as the positive class.
struct EvalStats {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0, recall = 0, f1 = 0;

  static EvalStats from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);
};

/// Subword ids of one sentence (truncated to max_tokens) with its target.
struct Example {
  std::vector<std::uint32_t> ids;
  double target = 0;  // 1 = Original
};

class ClassifierModel {
 public:
  ClassifierModel() = default;
  /// Vocabulary from the segmented texts; parameters randomly initialized.
  ClassifierModel(ClassifierConfig config, subword::BpeModel bpe, const std::vector<std::string>& texts);

  const ClassifierConfig& config() const { return config_; }
  const subword::BpeModel& bpe() const { return bpe_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  nn::ParameterSet<float>& params() { return params_; }
  const nn::ParameterSet<float>& params() const { return params_; }

  /// Subword ids; unknown subwords map to id 0. Throws Error on empty text.
  std::vector<std::uint32_t> encode(std::string_view text) const;
  Example example(const LabeledSentence& s) const;

  /// Probability that `text` is original, in (0, 1).
  double predict(std::string_view text) const;
  double predict_ids(const std::vector<std::uint32_t>& ids) const;

  void save_file(const std::string& path) const;
  /// Throws Error if the checkpoint was trained with a different subword model.
  static ClassifierModel load_file(const std::string& path, subword::BpeModel bpe);

 private:
  ClassifierConfig config_;
  subword::BpeModel bpe_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::uint32_t> index_;
  nn::ParameterSet<float> params_;

  void build_index();
};

inline constexpr std::string_view kUnknownToken = "<unk>";

/// Adds the classifier's parameters (names and shapes) to an empty set.
template <typename T>
void declare_parameters(nn::ParameterSet<T>& params, const ClassifierConfig& config, std::size_t vocab_size);

/// Mean binary cross-entropy over `batch`; accumulates gradients when
/// `with_grad`. Dropout is applied when `dropout_seed` is non-zero.
template <typename T>
double batch_loss(nn::ParameterSet<T>& params, const ClassifierConfig& config, const std::vector<const Example*>& batch,
                  bool with_grad, std::uint64_t dropout_seed = 0);

struct TrainingLog {
  struct Step {
    std::size_t step;
    double loss;
  };
  struct Evaluation {
    std::size_t step;
    EvalStats dev;
  };
  std::vector<Step> steps;
  std::vector<Evaluation> evaluations;
  std::size_t best_evaluation = 0;  // index into evaluations

  void write_tsv(std::ostream& out) const;
};

struct TrainingResult {
  ClassifierModel model;
  TrainingLog log;
};

/// Adagrad on class-balanced mini-batches; keeps the parameters with the
/// highest dev F1 (earliest on ties).
TrainingResult train_classifier(const LabeledCorpus& train, const LabeledCorpus& dev, const ClassifierConfig& config,
                                const subword::BpeModel& bpe);

EvalStats evaluate(const ClassifierModel& model, const LabeledCorpus& test, double threshold = 0.5);
EvalStats evaluate_probabilities(const std::vector<double>& probabilities, const LabeledCorpus& test,
                                 double threshold = 0.5);

}  // namespace tagmt::classifier
