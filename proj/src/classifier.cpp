#include "tagmt/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "json.hpp"
#include "tagmt/unicode.hpp"

namespace tagmt::classifier {

using nlohmann::ordered_json;

// --- config ----------------------------------------------------------------

std::string ClassifierConfig::to_json() const {
  ordered_json j;
  j["embedding_dim"] = embedding_dim;
  j["widths"] = widths;
  j["filters"] = filters;
  j["dropout"] = dropout;
  j["max_tokens"] = max_tokens;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["epochs"] = epochs;
  j["eval_interval"] = eval_interval;
  j["seed"] = seed;
  return j.dump();
}

ClassifierConfig ClassifierConfig::from_json(std::string_view text) {
  ClassifierConfig c;
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("classifier config: ") + e.what());
  }
  if (!j.is_object()) throw Error("classifier config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "embedding_dim") c.embedding_dim = value.get<std::size_t>();
      else if (key == "widths") c.widths = value.get<std::vector<std::size_t>>();
      else if (key == "filters") c.filters = value.get<std::size_t>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "max_tokens") c.max_tokens = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "eval_interval") c.eval_interval = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw Error("classifier config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw Error("classifier config: bad value for '" + key + "'");
    }
  }
  c.validate();
  return c;
}

void ClassifierConfig::validate() const {
  if (embedding_dim == 0 || filters == 0) throw Error("classifier config: dimensions must be positive");
  if (widths.empty()) throw Error("classifier config: at least one convolution layer is required");
  for (auto w : widths) {
    if (w == 0) throw Error("classifier config: convolution width must be positive");
  }
  if (!(dropout >= 0 && dropout < 1)) throw Error("classifier config: dropout must lie in [0, 1)");
  if (max_tokens == 0 || batch_size < 2 || eval_interval == 0) {
    throw Error("classifier config: max_tokens, eval_interval must be positive and batch_size at least 2");
  }
  if (!(learning_rate > 0)) throw Error("classifier config: learning rate must be positive");
}

// --- metrics -----------------------------------------------------------------

EvalStats EvalStats::from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  EvalStats s{tp, fp, fn, tn, 0, 0, 0};
  if (tp + fp > 0) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

EvalStats evaluate_probabilities(const std::vector<double>& probabilities, const LabeledCorpus& test,
                                 double threshold) {
  if (probabilities.size() != test.size()) throw Error("evaluate: prediction count does not match test set");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool predicted = probabilities[i] > threshold;
    const bool original = test[i].label == Label::Original;
    if (predicted && original) ++tp;
    else if (predicted) ++fp;
    else if (original) ++fn;
    else ++tn;
  }
  return EvalStats::from_counts(tp, fp, fn, tn);
}

EvalStats evaluate(const ClassifierModel& model, const LabeledCorpus& test, double threshold) {
  std::vector<double> p;
  p.reserve(test.size());
  for (const auto& s : test) p.push_back(model.predict(s.text));
  return evaluate_probabilities(p, test, threshold);
}

// --- network -----------------------------------------------------------------

namespace {

std::string conv_name(std::size_t layer, const char* part) {
  return "conv" + std::to_string(layer + 1) + "." + part;
}

template <typename T>
struct Layout {
  Layout(nn::ParameterSet<T>& params, const ClassifierConfig& config) {
    embedding = &params[params.find("embedding")];
    for (std::size_t k = 0; k < config.widths.size(); ++k) {
      conv_weight.push_back(&params[params.find(conv_name(k, "weight"))]);
      conv_bias.push_back(&params[params.find(conv_name(k, "bias"))]);
    }
    out_weight = &params[params.find("output.weight")];
    out_bias = &params[params.find("output.bias")];
  }
  nn::Parameter<T>* embedding;
  std::vector<nn::Parameter<T>*> conv_weight, conv_bias;
  nn::Parameter<T>* out_weight;
  nn::Parameter<T>* out_bias;
};

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// "Same" convolution over time with zero padding, followed by ReLU.
// weight is [width][in][out].
template <typename T>
void conv_forward(const std::vector<T>& x, std::size_t n, std::size_t in, const std::vector<T>& weight,
                  const std::vector<T>& bias, std::size_t width, std::size_t out, std::vector<T>& y) {
  y.assign(n * out, T(0));
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((width - 1) / 2);
  for (std::size_t t = 0; t < n; ++t) {
    T* yr = y.data() + t * out;
    std::copy(bias.begin(), bias.end(), yr);
    for (std::size_t j = 0; j < width; ++j) {
      const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - left;
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(n)) continue;
      const T* xr = x.data() + static_cast<std::size_t>(s) * in;
      for (std::size_t i = 0; i < in; ++i) {
        const T xi = xr[i];
        if (xi == T(0)) continue;
        const T* wr = weight.data() + (j * in + i) * out;
        for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
      }
    }
    for (std::size_t o = 0; o < out; ++o) yr[o] = yr[o] > T(0) ? yr[o] : T(0);
  }
}

// dy holds d(loss)/d(relu output); it is masked in place by the activation.
template <typename T>
void conv_backward(const std::vector<T>& x, std::size_t n, std::size_t in, const std::vector<T>& weight,
                   std::size_t width, std::size_t out, const std::vector<T>& y, std::vector<T>& dy,
                   std::vector<T>& grad_weight, std::vector<T>& grad_bias, std::vector<T>* dx) {
  if (dx) dx->assign(n * in, T(0));
  const std::ptrdiff_t left = static_cast<std::ptrdiff_t>((width - 1) / 2);
  for (std::size_t t = 0; t < n; ++t) {
    T* dyr = dy.data() + t * out;
    const T* yr = y.data() + t * out;
    bool any = false;
    for (std::size_t o = 0; o < out; ++o) {
      if (!(yr[o] > T(0))) dyr[o] = T(0);
      any = any || dyr[o] != T(0);
    }
    if (!any) continue;
    for (std::size_t o = 0; o < out; ++o) grad_bias[o] += dyr[o];
    for (std::size_t j = 0; j < width; ++j) {
      const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - left;
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(n)) continue;
      const T* xr = x.data() + static_cast<std::size_t>(s) * in;
      T* dxr = dx ? dx->data() + static_cast<std::size_t>(s) * in : nullptr;
      for (std::size_t i = 0; i < in; ++i) {
        const T* wr = weight.data() + (j * in + i) * out;
        T* gr = grad_weight.data() + (j * in + i) * out;
        const T xi = xr[i];
        if (xi != T(0)) {
          for (std::size_t o = 0; o < out; ++o) gr[o] += xi * dyr[o];
        }
        if (dxr) dxr[i] += dot(wr, dyr, out);
      }
    }
  }
}

template <typename T>
struct Workspace {
  std::vector<std::vector<T>> acts;  // acts[0] embeddings, acts[k] output of conv layer k
  std::vector<T> pooled;
  std::vector<std::size_t> argmax;
  std::vector<T> mask;
};

// Returns the logit.
template <typename T>
T forward(Layout<T>& net, const ClassifierConfig& config, const std::vector<std::uint32_t>& ids, Workspace<T>& ws,
          Rng* dropout_rng) {
  const std::size_t n = ids.size();
  const std::size_t e = config.embedding_dim;
  const std::size_t f = config.filters;
  const std::size_t vocab = net.embedding->shape[0];
  ws.acts.resize(config.widths.size() + 1);
  auto& x0 = ws.acts[0];
  x0.resize(n * e);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t id = ids[t] < vocab ? ids[t] : 0;
    std::copy_n(net.embedding->value.data() + id * e, e, x0.data() + t * e);
  }
  std::size_t in = e;
  for (std::size_t k = 0; k < config.widths.size(); ++k) {
    conv_forward(ws.acts[k], n, in, net.conv_weight[k]->value, net.conv_bias[k]->value, config.widths[k], f,
                 ws.acts[k + 1]);
    in = f;
  }
  const auto& top = ws.acts.back();
  ws.pooled.assign(f, T(0));
  ws.argmax.assign(f, 0);
  for (std::size_t o = 0; o < f; ++o) {
    T best = top[o];
    std::size_t where = 0;
    for (std::size_t t = 1; t < n; ++t) {
      if (top[t * f + o] > best) {
        best = top[t * f + o];
        where = t;
      }
    }
    ws.pooled[o] = best;
    ws.argmax[o] = where;
  }
  ws.mask.assign(f, T(1));
  if (dropout_rng) {
    const T keep_scale = static_cast<T>(1.0 / (1.0 - config.dropout));
    for (auto& m : ws.mask) m = dropout_rng->bernoulli(config.dropout) ? T(0) : keep_scale;
  }
  T z = net.out_bias->value[0];
  for (std::size_t o = 0; o < f; ++o) z += ws.pooled[o] * ws.mask[o] * net.out_weight->value[o];
  return z;
}

template <typename T>
void backward(Layout<T>& net, const ClassifierConfig& config, const std::vector<std::uint32_t>& ids,
              Workspace<T>& ws, T dz) {
  const std::size_t n = ids.size();
  const std::size_t e = config.embedding_dim;
  const std::size_t f = config.filters;
  net.out_bias->grad[0] += dz;
  std::vector<T> d(n * f, T(0));
  for (std::size_t o = 0; o < f; ++o) {
    net.out_weight->grad[o] += dz * ws.pooled[o] * ws.mask[o];
    d[ws.argmax[o] * f + o] += dz * net.out_weight->value[o] * ws.mask[o];
  }
  std::vector<T> below;
  for (std::size_t k = config.widths.size(); k-- > 0;) {
    const std::size_t in = k == 0 ? e : f;
    conv_backward(ws.acts[k], n, in, net.conv_weight[k]->value, config.widths[k], f, ws.acts[k + 1], d,
                  net.conv_weight[k]->grad, net.conv_bias[k]->grad, &below);
    d.swap(below);
  }
  const std::size_t vocab = net.embedding->shape[0];
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t id = ids[t] < vocab ? ids[t] : 0;
    T* g = net.embedding->grad.data() + id * e;
    for (std::size_t i = 0; i < e; ++i) g[i] += d[t * e + i];
  }
}

double sigmoid(double z) {
  const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  // keep strictly inside (0, 1) for saturated logits
  return std::clamp(p, 1e-300, std::nextafter(1.0, 0.0));
}

}  // namespace

template <typename T>
void declare_parameters(nn::ParameterSet<T>& params, const ClassifierConfig& config, std::size_t vocab_size) {
  params.add("embedding", {vocab_size, config.embedding_dim});
  std::size_t in = config.embedding_dim;
  for (std::size_t k = 0; k < config.widths.size(); ++k) {
    params.add(conv_name(k, "weight"), {config.widths[k], in, config.filters});
    params.add(conv_name(k, "bias"), {config.filters});
    in = config.filters;
  }
  params.add("output.weight", {config.filters});
  params.add("output.bias", {1});
}

template <typename T>
double batch_loss(nn::ParameterSet<T>& params, const ClassifierConfig& config, const std::vector<const Example*>& batch,
                  bool with_grad, std::uint64_t dropout_seed) {
  if (batch.empty()) throw Error("classifier: empty batch");
  Layout<T> net(params, config);
  Workspace<T> ws;
  Rng rng(dropout_seed);
  Rng* dropout = dropout_seed != 0 && config.dropout > 0 ? &rng : nullptr;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0;
  for (const Example* ex : batch) {
    if (ex->ids.empty()) throw Error("classifier: empty example");
    const double z = static_cast<double>(forward(net, config, ex->ids, ws, dropout));
    // binary cross-entropy on the logit, stable for large |z|
    total += std::max(z, 0.0) - z * ex->target + std::log1p(std::exp(-std::abs(z)));
    if (with_grad) backward(net, config, ex->ids, ws, static_cast<T>((sigmoid(z) - ex->target) * scale));
  }
  return total * scale;
}

template void declare_parameters<float>(nn::ParameterSet<float>&, const ClassifierConfig&, std::size_t);
template void declare_parameters<double>(nn::ParameterSet<double>&, const ClassifierConfig&, std::size_t);
template double batch_loss<float>(nn::ParameterSet<float>&, const ClassifierConfig&,
                                  const std::vector<const Example*>&, bool, std::uint64_t);
template double batch_loss<double>(nn::ParameterSet<double>&, const ClassifierConfig&,
                                   const std::vector<const Example*>&, bool, std::uint64_t);

// --- model -------------------------------------------------------------------

ClassifierModel::ClassifierModel(ClassifierConfig config, subword::BpeModel bpe, const std::vector<std::string>& texts)
    : config_(std::move(config)), bpe_(std::move(bpe)) {
  config_.validate();
  std::set<std::string> seen;
  for (const auto& text : texts) {
    const auto segmented = bpe_.apply(text);
    for (auto tok : unicode::split_whitespace(segmented)) seen.emplace(tok);
  }
  seen.erase(std::string(kUnknownToken));
  vocab_.push_back(std::string(kUnknownToken));
  vocab_.insert(vocab_.end(), seen.begin(), seen.end());
  build_index();

  declare_parameters(params_, config_, vocab_.size());
  const auto seed = derive_seed(config_.seed, "classifier.init");
  std::size_t in = config_.embedding_dim;
  for (auto& p : params_) {
    if (p.name == "embedding") {
      nn::init_uniform(p, seed, 0.1);
    } else if (p.name.ends_with(".weight") && p.name.starts_with("conv")) {
      nn::init_fan_scaled(p, seed, p.shape[0] * in, config_.filters);
      in = config_.filters;
    } else if (p.name == "output.weight") {
      nn::init_fan_scaled(p, seed, config_.filters, 1);
    }
  }
}

void ClassifierModel::build_index() {
  index_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<std::uint32_t>(i));
}

std::vector<std::uint32_t> ClassifierModel::encode(std::string_view text) const {
  if (unicode::trim(text).empty()) throw Error("classifier: empty input text");
  const auto segmented = bpe_.apply(text);
  std::vector<std::uint32_t> ids;
  for (auto tok : unicode::split_whitespace(segmented)) {
    if (ids.size() == config_.max_tokens) break;
    auto it = index_.find(std::string(tok));
    ids.push_back(it == index_.end() ? 0 : it->second);
  }
  return ids;
}

Example ClassifierModel::example(const LabeledSentence& s) const {
  return {encode(s.text), s.label == Label::Original ? 1.0 : 0.0};
}

double ClassifierModel::predict_ids(const std::vector<std::uint32_t>& ids) const {
  if (ids.empty()) throw Error("classifier: empty input text");
  auto& params = const_cast<nn::ParameterSet<float>&>(params_);  // forward only reads values
  Layout<float> net(params, config_);
  Workspace<float> ws;
  return sigmoid(static_cast<double>(forward(net, config_, ids, ws, nullptr)));
}

double ClassifierModel::predict(std::string_view text) const { return predict_ids(encode(text)); }

void ClassifierModel::save_file(const std::string& path) const {
  nn::Checkpoint c;
  c.kind = "classifier";
  ordered_json j;
  j["version"] = 1;
  j["config"] = ordered_json::parse(config_.to_json());
  j["bpe_fingerprint"] = hex64(bpe_.fingerprint());
  j["vocab"] = vocab_;
  c.config_json = j.dump();
  c.params = params_;
  c.save_file(path);
}

ClassifierModel ClassifierModel::load_file(const std::string& path, subword::BpeModel bpe) {
  const auto c = nn::Checkpoint::load_file(path);
  if (c.kind != "classifier") throw Error("'" + path + "' is a " + c.kind + " checkpoint, not a classifier");
  ClassifierModel m;
  try {
    const auto j = ordered_json::parse(c.config_json);
    if (j.at("version").get<int>() != 1) throw Error("unsupported classifier checkpoint version");
    m.config_ = ClassifierConfig::from_json(j.at("config").dump());
    if (j.at("bpe_fingerprint").get<std::string>() != hex64(bpe.fingerprint())) {
      throw Error("classifier '" + path + "' was trained with a different subword model");
    }
    m.vocab_ = j.at("vocab").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("classifier checkpoint '" + path + "': " + e.what());
  }
  m.bpe_ = std::move(bpe);
  m.build_index();
  declare_parameters(m.params_, m.config_, m.vocab_.size());
  m.params_.assign_values(c.params);
  return m;
}

// --- training ----------------------------------------------------------------

void TrainingLog::write_tsv(std::ostream& out) const {
  char buf[128];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "loss\t%zu\t%.6f\n", s.step, s.loss);
    out << buf;
  }
  for (const auto& e : evaluations) {
    std::snprintf(buf, sizeof buf, "dev\t%zu\t%.6f\t%.6f\t%.6f\n", e.step, e.dev.precision, e.dev.recall, e.dev.f1);
    out << buf;
  }
  if (!evaluations.empty()) {
    const auto& b = evaluations[best_evaluation];
    std::snprintf(buf, sizeof buf, "best\t%zu\t%.6f\n", b.step, b.dev.f1);
    out << buf;
  }
}

namespace {

void require_both_classes(const LabeledCorpus& data, const char* what) {
  bool original = false, translated = false;
  for (const auto& s : data) (s.label == Label::Original ? original : translated) = true;
  if (!original || !translated) throw Error(std::string("classifier: ") + what + " set must contain both classes");
}

// Cycles through a shuffled index list, reshuffling on every wrap.
class ClassStream {
 public:
  ClassStream(std::vector<std::size_t> items, Rng& rng) : items_(std::move(items)), rng_(rng) { shuffle(); }
  std::size_t next() {
    if (pos_ == items_.size()) shuffle();
    return items_[pos_++];
  }

 private:
  void shuffle() {
    for (std::size_t i = items_.size(); i > 1; --i) std::swap(items_[i - 1], items_[rng_.below(i)]);
    pos_ = 0;
  }
  std::vector<std::size_t> items_;
  Rng& rng_;
  std::size_t pos_ = 0;
};

}  // namespace

TrainingResult train_classifier(const LabeledCorpus& train, const LabeledCorpus& dev, const ClassifierConfig& config,
                                const subword::BpeModel& bpe) {
  config.validate();
  require_both_classes(train, "training");
  require_both_classes(dev, "dev");

  std::vector<std::string> texts;
  texts.reserve(train.size());
  for (const auto& s : train) texts.push_back(s.text);
  TrainingResult result{ClassifierModel(config, bpe, texts), {}};
  auto& model = result.model;

  std::vector<Example> examples;
  std::vector<std::size_t> originals, translated;
  for (std::size_t i = 0; i < train.size(); ++i) {
    examples.push_back(model.example(train[i]));
    (train[i].label == Label::Original ? originals : translated).push_back(i);
  }
  std::vector<std::vector<std::uint32_t>> dev_ids;
  for (const auto& s : dev) dev_ids.push_back(model.encode(s.text));

  Rng batch_rng(derive_seed(config.seed, "classifier.batches"));
  ClassStream original_stream(originals, batch_rng);
  ClassStream translated_stream(translated, batch_rng);
  auto adagrad = nn::make_adagrad(model.params(), config.learning_rate);
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, train.size() / config.batch_size);
  const std::size_t total_steps = steps_per_epoch * std::max<std::size_t>(1, config.epochs);
  const std::uint64_t dropout_root = derive_seed(config.seed, "classifier.dropout");

  nn::ParameterSet<float> best = model.params();
  double best_f1 = -1;
  std::vector<const Example*> batch(config.batch_size);
  std::vector<double> probabilities(dev.size());
  for (std::size_t step = 1; step <= total_steps; ++step) {
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      batch[b] = &examples[b % 2 == 0 ? original_stream.next() : translated_stream.next()];
    }
    model.params().zero_grad();
    const double loss = batch_loss(model.params(), config, batch, true, splitmix64(dropout_root + step));
    if (!std::isfinite(loss)) throw Error("classifier training: non-finite loss at step " + std::to_string(step));
    nn::adagrad_update(model.params(), adagrad);
    result.log.steps.push_back({step, loss});

    if (step % config.eval_interval == 0 || step == total_steps) {
      for (std::size_t i = 0; i < dev.size(); ++i) probabilities[i] = model.predict_ids(dev_ids[i]);
      const auto stats = evaluate_probabilities(probabilities, dev);
      result.log.evaluations.push_back({step, stats});
      if (stats.f1 > best_f1) {
        best_f1 = stats.f1;
        best = model.params();
        result.log.best_evaluation = result.log.evaluations.size() - 1;
      }
    }
  }
  model.params() = std::move(best);
  model.params().zero_grad();
  return result;
}

}  // namespace tagmt::classifier
