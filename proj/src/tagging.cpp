#include "tagmt/tagging.hpp"

#include <cmath>
#include <cstdio>

#include "tagmt/unicode.hpp"

namespace tagmt::tagging {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(std::string("tag policy: ") + what + " must be finite");
}

}  // namespace

std::string describe(const TagPolicy& p) {
  return std::visit(overloaded{
                        [](const policy::Classifier& c) { return "classifier(" + number(c.threshold) + ")"; },
                        [](const policy::LengthRatio& c) { return "length-ratio(" + number(c.rho) + ")"; },
                        [](const policy::LexicalDensity& c) {
                          return "lexical-density(" + number(c.cutoff) + "," + c.function_words.language() + ")";
                        },
                        [](const policy::AllTagged&) { return std::string("all-tagged"); },
                        [](const policy::Untagged&) { return std::string("untagged"); },
                        [](const policy::OriginLabel&) { return std::string("origin-label"); },
                    },
                    p);
}

void validate(const TagPolicy& p) {
  if (const auto* c = std::get_if<policy::Classifier>(&p)) {
    require_finite(c->threshold, "classifier threshold");
    if (!c->model) throw Error("tag policy: classifier policy has no model");
  } else if (const auto* l = std::get_if<policy::LengthRatio>(&p)) {
    require_finite(l->rho, "length ratio threshold");
  } else if (const auto* d = std::get_if<policy::LexicalDensity>(&p)) {
    require_finite(d->cutoff, "lexical density cutoff");
  }
}

std::string TagStats::format() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu / %zu / %.6f", total, tagged, fraction_tagged());
  return buf;
}

TagStats count_tags(const ParallelCorpus& corpus) {
  TagStats s;
  s.total = corpus.size();
  for (const auto& p : corpus) s.tagged += p.tagged;
  return s;
}

double compute_length_threshold(const MonoCorpus& mono_x, const MonoCorpus& mono_y) {
  if (mono_x.empty() || mono_y.empty()) throw Error("compute_length_threshold: empty corpus");
  auto mean_tokens = [](const MonoCorpus& c) {
    std::size_t n = 0;
    for (const auto& l : c) n += unicode::count_tokens(l);
    return static_cast<double>(n) / static_cast<double>(c.size());
  };
  const double y = mean_tokens(mono_y);
  if (y == 0) throw Error("compute_length_threshold: second corpus has no tokens");
  return mean_tokens(mono_x) / y;
}

bool decide(const SentencePair& pair, const TagPolicy& p) {
  return std::visit(
      overloaded{
          [&](const policy::Classifier& c) { return c.model->predict(pair.target) > c.threshold; },
          [&](const policy::LengthRatio& c) {
            const auto y = unicode::count_tokens(pair.target);
            if (y == 0) throw Error("length-ratio policy: empty target, ratio undefined");
            return static_cast<double>(unicode::count_tokens(pair.source)) / static_cast<double>(y) > c.rho;
          },
          [&](const policy::LexicalDensity& c) {
            return metrics::lexical_density({pair.target}, c.function_words) > c.cutoff;
          },
          [](const policy::AllTagged&) { return true; },
          [](const policy::Untagged&) { return false; },
          [&](const policy::OriginLabel&) {
            if (pair.origin == Origin::Unknown) throw Error("origin-label policy: pair has no origin label");
            return pair.origin == Origin::TargetOriginal;
          },
      },
      p);
}

Tagged apply_policy(const ParallelCorpus& corpus, const TagPolicy& policy) {
  validate(policy);
  Tagged out{corpus, {}};
  for (std::size_t i = 0; i < out.corpus.size(); ++i) {
    try {
      out.corpus[i].tagged = decide(out.corpus[i], policy);
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " (pair " + std::to_string(i + 1) + ")");
    }
  }
  out.stats = count_tags(out.corpus);
  return out;
}

ParallelCorpus upsample_balance(const ParallelCorpus& corpus) {
  std::vector<std::size_t> tagged, untagged;
  for (std::size_t i = 0; i < corpus.size(); ++i) (corpus[i].tagged ? tagged : untagged).push_back(i);
  if (tagged.empty() || untagged.empty()) throw Error("upsample_balance: one subset is empty, nothing to balance");
  const auto& smaller = tagged.size() < untagged.size() ? tagged : untagged;
  const std::size_t goal = std::max(tagged.size(), untagged.size());
  ParallelCorpus out = corpus;
  for (std::size_t have = smaller.size(), k = 0; have < goal; ++have, ++k) {
    out.push_back(corpus[smaller[k % smaller.size()]]);
  }
  return out;
}

Merged merge_bt(const ParallelCorpus& bitext, const ParallelCorpus& back_translated, const TagPolicy& bt_policy) {
  Merged m;
  auto bt = apply_policy(back_translated, bt_policy);
  m.bitext = count_tags(bitext);
  m.back_translated = bt.stats;
  m.corpus = bitext;
  m.corpus.insert(m.corpus.end(), bt.corpus.begin(), bt.corpus.end());
  m.combined = count_tags(m.corpus);
  return m;
}

}  // namespace tagmt::tagging
