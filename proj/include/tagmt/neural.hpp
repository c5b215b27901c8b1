#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tagmt/common.hpp"

namespace tagmt::nn {

/// One named dense array with its gradient slot.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;

  std::size_t size() const { return value.size(); }
};

/// Ordered collection of named parameters. Models index parameters by the
/// handle returned from add(), which stays valid as more are added.
template <typename T>
class ParameterSet {
 public:
  using Handle = std::size_t;

  Handle add(std::string name, std::vector<std::size_t> shape) {
    for (const auto& p : params_) {
      if (p.name == name) throw Error("duplicate parameter '" + name + "'");
    }
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    params_.push_back({std::move(name), std::move(shape), std::vector<T>(n, T(0)), std::vector<T>(n, T(0))});
    return params_.size() - 1;
  }

  Parameter<T>& operator[](Handle h) { return params_[h]; }
  const Parameter<T>& operator[](Handle h) const { return params_[h]; }
  std::size_t count() const { return params_.size(); }
  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }
  Handle find(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    throw Error("no parameter named '" + std::string(name) + "'");
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

  /// Same names and shapes with values converted to U; gradients zeroed.
  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) {
      auto h = out.add(p.name, p.shape);
      for (std::size_t i = 0; i < p.size(); ++i) out[h].value[i] = static_cast<U>(p.value[i]);
    }
    return out;
  }

  /// Copies values from a structurally identical set.
  template <typename U>
  void assign_values(const ParameterSet<U>& other) {
    if (other.count() != count()) throw Error("parameter set mismatch");
    for (std::size_t h = 0; h < count(); ++h) {
      if (other[h].name != params_[h].name || other[h].shape != params_[h].shape) {
        throw Error("parameter set mismatch at '" + params_[h].name + "'");
      }
      for (std::size_t i = 0; i < params_[h].size(); ++i) params_[h].value[i] = static_cast<T>(other[h].value[i]);
    }
  }

  /// FNV-1a over names, shapes and raw value bytes.
  std::uint64_t checksum() const {
    std::uint64_t h = fnv1a64("");
    for (const auto& p : params_) {
      h = fnv1a64(p.name, h);
      for (auto d : p.shape) h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&d), sizeof d), h);
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p.value.data()), p.value.size() * sizeof(T)), h);
    }
    return h;
  }

 private:
  std::vector<Parameter<T>> params_;
};

// --- initialization ------------------------------------------------------

/// Each parameter draws from its own stream derived from (seed, name), so the
/// result does not depend on initialization order.
template <typename T>
void init_uniform(Parameter<T>& p, std::uint64_t seed, double bound) {
  Rng rng(derive_seed(seed, p.name));
  for (auto& v : p.value) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// Uniform(-sqrt(6/(fan_in+fan_out)), +...).
template <typename T>
void init_fan_scaled(Parameter<T>& p, std::uint64_t seed, std::size_t fan_in, std::size_t fan_out) {
  init_uniform(p, seed, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

// --- optimizers ----------------------------------------------------------

template <typename T>
struct AdagradState {
  double learning_rate = 0.1;
  double epsilon = 1e-8;
  std::vector<std::vector<T>> accumulator;  // sum of squared gradients
};

template <typename T>
AdagradState<T> make_adagrad(const ParameterSet<T>& params, double learning_rate, double epsilon = 1e-8) {
  if (!(learning_rate > 0)) throw Error("adagrad: learning rate must be positive");
  AdagradState<T> s{learning_rate, epsilon, {}};
  for (const auto& p : params) s.accumulator.emplace_back(p.size(), T(0));
  return s;
}

/// G += g^2; theta -= lr * g / (sqrt(G) + eps). Uses the gradient slots.
template <typename T>
void adagrad_update(ParameterSet<T>& params, AdagradState<T>& state) {
  if (state.accumulator.size() != params.count()) throw Error("adagrad: state does not match parameters");
  for (std::size_t h = 0; h < params.count(); ++h) {
    const auto& p = params[h];
    if (state.accumulator[h].size() != p.size()) throw Error("adagrad: shape mismatch for '" + p.name + "'");
    for (const T g : p.grad) {
      if (!std::isfinite(static_cast<double>(g))) throw Error("adagrad: non-finite gradient in '" + p.name + "'");
    }
  }
  const T lr = static_cast<T>(state.learning_rate);
  const T eps = static_cast<T>(state.epsilon);
  for (std::size_t h = 0; h < params.count(); ++h) {
    auto& p = params[h];
    auto& acc = state.accumulator[h];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T g = p.grad[i];
      acc[i] += g * g;
      p.value[i] -= lr * g / (std::sqrt(acc[i]) + eps);
    }
  }
}

template <typename T>
struct EmaState {
  double decay = 0.9999;
  std::vector<std::vector<T>> shadow;
};

template <typename T>
EmaState<T> make_ema(const ParameterSet<T>& params, double decay) {
  if (!(decay >= 0 && decay <= 1)) throw Error("ema: decay must lie in [0, 1]");
  EmaState<T> s{decay, {}};
  for (const auto& p : params) s.shadow.push_back(p.value);
  return s;
}

/// shadow <- decay * shadow + (1 - decay) * params.
template <typename T>
void ema_update(EmaState<T>& ema, const ParameterSet<T>& params) {
  if (ema.shadow.size() != params.count()) throw Error("ema: shadow does not match parameters");
  const T d = static_cast<T>(ema.decay);
  const T rest = static_cast<T>(1.0 - ema.decay);
  for (std::size_t h = 0; h < params.count(); ++h) {
    auto& s = ema.shadow[h];
    const auto& v = params[h].value;
    if (s.size() != v.size()) throw Error("ema: shape mismatch for '" + params[h].name + "'");
    for (std::size_t i = 0; i < v.size(); ++i) s[i] = d * s[i] + rest * v[i];
  }
}

/// Copy of `params` whose values are the EMA shadow.
template <typename T>
ParameterSet<T> with_shadow(const ParameterSet<T>& params, const EmaState<T>& ema) {
  ParameterSet<T> out = params;
  for (std::size_t h = 0; h < out.count(); ++h) out[h].value = ema.shadow.at(h);
  return out;
}

// --- gradient checking ---------------------------------------------------

/// Loss over a parameter set. When `with_grad` is true the function must
/// accumulate d(loss)/d(theta) into the (pre-zeroed) gradient slots.
using LossFunction = std::function<double(ParameterSet<double>&, bool with_grad)>;

struct GradientCheckResult {
  double max_relative_error = 0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
};

/// Compares analytic gradients with central differences on up to
/// `coordinates` randomly chosen coordinates (all of them if fewer exist).
/// Throws Error if two evaluations at the same point disagree.
GradientCheckResult gradient_check(const LossFunction& loss, ParameterSet<double>& params, double h = 1e-4,
                                   std::size_t coordinates = 200, std::uint64_t seed = 1);

// --- checkpoints ---------------------------------------------------------

/// Versioned binary container: config JSON text, parameters, optimizer
/// accumulators and EMA shadow (either may be absent). Little-endian.
struct Checkpoint {
  std::string kind;         // e.g. "classifier", "toymt"
  std::string config_json;  // model configuration and vocabulary
  ParameterSet<float> params;
  std::vector<std::vector<float>> adagrad;
  std::vector<std::vector<float>> ema;
  double adagrad_learning_rate = 0;
  double ema_decay = 0;

  void save(std::ostream& out) const;
  static Checkpoint load(std::istream& in);
  void save_file(const std::string& path) const;
  static Checkpoint load_file(const std::string& path);
};

}  // namespace tagmt::nn
