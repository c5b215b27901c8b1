#include "tagmt/neural.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace tagmt::nn {

GradientCheckResult gradient_check(const LossFunction& loss, ParameterSet<double>& params, double h,
                                   std::size_t coordinates, std::uint64_t seed) {
  params.zero_grad();
  const double base = loss(params, true);
  params.zero_grad();
  if (loss(params, true) != base) throw Error("gradient_check: loss is not deterministic");

  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t p = 0; p < params.count(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) all.emplace_back(p, i);
  }
  if (all.size() > coordinates) {
    Rng rng(seed);
    for (std::size_t k = 0; k < coordinates; ++k) {
      std::swap(all[k], all[k + rng.below(all.size() - k)]);
    }
    all.resize(coordinates);
  }

  GradientCheckResult result;
  result.coordinates = all.size();
  for (const auto& [p, i] : all) {
    auto& value = params[p].value[i];
    const double analytic = params[p].grad[i];
    const double saved = value;
    value = saved + h;
    const double plus = loss(params, false);
    value = saved - h;
    const double minus = loss(params, false);
    value = saved;
    const double numeric = (plus - minus) / (2 * h);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_parameter = params[p].name + "[" + std::to_string(i) + "]";
    }
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'T', 'A', 'G', 'M', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, std::string_view s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

template <typename V>
V get(std::istream& in) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("checkpoint: truncated file");
  return v;
}

std::uint64_t get_size(std::istream& in, std::uint64_t limit = 1ULL << 34) {
  const auto n = get<std::uint64_t>(in);
  if (n > limit) throw Error("checkpoint: implausible length field");
  return n;
}

std::string get_string(std::istream& in) {
  std::string s(get_size(in), '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(s.size()))) throw Error("checkpoint: truncated string");
  return s;
}

std::vector<float> get_floats(std::istream& in) {
  std::vector<float> v(get_size(in));
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)))) {
    throw Error("checkpoint: truncated array");
  }
  return v;
}

void put_slots(std::ostream& out, const std::vector<std::vector<float>>& slots) {
  put<std::uint64_t>(out, slots.size());
  for (const auto& s : slots) put_floats(out, s);
}

std::vector<std::vector<float>> get_slots(std::istream& in) {
  std::vector<std::vector<float>> slots(get_size(in, 1 << 20));
  for (auto& s : slots) s = get_floats(in);
  return slots;
}

}  // namespace

void Checkpoint::save(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  put_string(out, kind);
  put_string(out, config_json);
  put<std::uint64_t>(out, params.count());
  for (const auto& p : params) {
    put_string(out, p.name);
    put<std::uint64_t>(out, p.shape.size());
    for (auto d : p.shape) put<std::uint64_t>(out, d);
    put_floats(out, p.value);
  }
  put(out, adagrad_learning_rate);
  put_slots(out, adagrad);
  put(out, ema_decay);
  put_slots(out, ema);
  if (!out) throw Error("checkpoint: write failed");
}

Checkpoint Checkpoint::load(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error("checkpoint: bad magic");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  c.kind = get_string(in);
  c.config_json = get_string(in);
  const auto n = get_size(in, 1 << 20);
  for (std::uint64_t k = 0; k < n; ++k) {
    auto name = get_string(in);
    std::vector<std::size_t> shape(get_size(in, 16));
    for (auto& d : shape) d = get_size(in);
    auto h = c.params.add(std::move(name), std::move(shape));
    auto values = get_floats(in);
    if (values.size() != c.params[h].size()) throw Error("checkpoint: array size does not match its shape");
    c.params[h].value = std::move(values);
  }
  c.adagrad_learning_rate = get<double>(in);
  c.adagrad = get_slots(in);
  c.ema_decay = get<double>(in);
  c.ema = get_slots(in);
  for (const auto* slots : {&c.adagrad, &c.ema}) {
    if (slots->empty()) continue;
    if (slots->size() != c.params.count()) throw Error("checkpoint: optimizer state does not match parameters");
    for (std::size_t h = 0; h < slots->size(); ++h) {
      if ((*slots)[h].size() != c.params[h].size()) throw Error("checkpoint: optimizer slot shape mismatch");
    }
  }
  return c;
}

void Checkpoint::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save(out);
}

Checkpoint Checkpoint::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return load(in);
}

}  // namespace tagmt::nn
