#include "tagmt/textmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "tagmt/common.hpp"
#include "tagmt/unicode.hpp"

namespace tagmt::metrics {
namespace {

#include "function_words.inc"

struct Counts {
  std::size_t tokens = 0;
  std::size_t types = 0;
};

Counts type_token_counts(const std::vector<std::string>& lines) {
  std::unordered_set<std::string_view> types;
  std::size_t tokens = 0;
  for (const auto& line : lines) {
    for (auto tok : unicode::split_whitespace(line)) {
      types.insert(tok);
      ++tokens;
    }
  }
  return {tokens, types.size()};
}

}  // namespace

FunctionWordList::FunctionWordList(std::string language, std::set<std::string> words)
    : language_(std::move(language)), words_(std::move(words)) {
  if (words_.empty()) throw Error("function word list '" + language_ + "' is empty");
  for (const auto& w : words_) {
    if (w.empty() || unicode::count_tokens(w) != 1 || unicode::split_whitespace(w)[0] != w) {
      throw Error("function word '" + w + "' must be a single whitespace-free token");
    }
    if (unicode::to_lower(w) != w) throw Error("function word '" + w + "' must be lowercase");
  }
}

bool FunctionWordList::is_function_word(std::string_view token) const {
  return words_.count(unicode::to_lower(token)) > 0;
}

bool FunctionWordList::is_content_word(std::string_view token) const {
  return unicode::contains_letter(token) && !is_function_word(token);
}

FunctionWordList FunctionWordList::parse(std::istream& in, std::string language) {
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    for (auto tok : unicode::split_whitespace(line)) words.emplace(tok);
  }
  return FunctionWordList(std::move(language), std::move(words));
}

FunctionWordList FunctionWordList::load_file(const std::string& path, std::string language) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open function word list '" + path + "'");
  return parse(in, std::move(language));
}

FunctionWordList FunctionWordList::builtin(std::string_view language) {
  std::string_view text;
  if (language == "en") {
    text = kEnglishFunctionWords;
  } else if (language == "fr") {
    text = kFrenchFunctionWords;
  } else if (language == "de") {
    text = kGermanFunctionWords;
  } else {
    throw Error("no built-in function word list for '" + std::string(language) + "'");
  }
  std::istringstream in{std::string(text)};
  return parse(in, std::string(language));
}

double lexical_variety(const std::vector<std::string>& lines) {
  const auto c = type_token_counts(lines);
  if (c.tokens == 0) throw Error("lexical_variety: corpus has no tokens");
  return static_cast<double>(c.types) / static_cast<double>(c.tokens);
}

double lexical_variety_sentence_averaged(const std::vector<std::string>& lines) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& line : lines) {
    const auto toks = unicode::split_whitespace(line);
    if (toks.empty()) continue;
    const std::unordered_set<std::string_view> types(toks.begin(), toks.end());
    sum += static_cast<double>(types.size()) / static_cast<double>(toks.size());
    ++n;
  }
  if (n == 0) throw Error("lexical_variety: corpus has no tokens");
  return sum / static_cast<double>(n);
}

double lexical_density(const std::vector<std::string>& lines, const FunctionWordList& fw) {
  std::size_t tokens = 0;
  std::size_t content = 0;
  for (const auto& line : lines) {
    for (auto tok : unicode::split_whitespace(line)) {
      ++tokens;
      if (fw.is_content_word(tok)) ++content;
    }
  }
  if (tokens == 0) throw Error("lexical_density: corpus has no tokens");
  return static_cast<double>(content) / static_cast<double>(tokens);
}

double length_variety(const std::vector<std::string>& sources, const std::vector<std::string>& outputs) {
  if (sources.size() != outputs.size()) {
    throw Error("length_variety: " + std::to_string(sources.size()) + " sources vs " +
                std::to_string(outputs.size()) + " outputs");
  }
  if (sources.empty()) throw Error("length_variety: no sentence pairs");
  double sum = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto x = static_cast<double>(unicode::count_tokens(sources[i]));
    if (x == 0) throw Error("length_variety: empty source on line " + std::to_string(i + 1));
    const auto y = static_cast<double>(unicode::count_tokens(outputs[i]));
    sum += std::abs(x - y) / x;
  }
  return sum / static_cast<double>(sources.size());
}

double length_variety(const ParallelCorpus& pairs) {
  std::vector<std::string> src, out;
  src.reserve(pairs.size());
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    src.push_back(p.source);
    out.push_back(p.target);
  }
  return length_variety(src, out);
}

MetricReport measure(const std::vector<std::string>& outputs, const std::vector<std::string>& sources,
                     const FunctionWordList& fw, const std::vector<std::string>* references) {
  MetricReport r;
  const auto c = type_token_counts(outputs);
  r.token_count = c.tokens;
  r.type_count = c.types;
  r.lexical_variety = lexical_variety(outputs);
  r.lexical_density = lexical_density(outputs, fw);
  r.length_variety = length_variety(sources, outputs);
  if (references) r.bleu = corpus_bleu(outputs, *references).score;
  return r;
}

std::string to_key_value(const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "lexical_variety\t%.6f\nlexical_density\t%.6f\nlength_variety\t%.6f\ntoken_count\t%zu\ntype_count\t%zu\n",
                r.lexical_variety, r.lexical_density, r.length_variety, r.token_count, r.type_count);
  std::string out = buf;
  if (r.bleu) {
    std::snprintf(buf, sizeof buf, "bleu\t%.4f\n", *r.bleu);
    out += buf;
  }
  return out;
}

std::string to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["lexical_variety"] = r.lexical_variety;
  j["lexical_density"] = r.lexical_density;
  j["length_variety"] = r.length_variety;
  j["token_count"] = r.token_count;
  j["type_count"] = r.type_count;
  if (r.bleu) j["bleu"] = *r.bleu;
  return j.dump(2);
}

// --- BLEU ---------------------------------------------------------------

std::string tokenize_intl(std::string_view line) {
  const auto in = unicode::decode(line);
  // Each pass reproduces one left-to-right, non-overlapping regex substitution.
  std::u32string a;
  a.reserve(in.size() * 2);
  std::size_t i = 0;
  while (i < in.size()) {
    if (i + 1 < in.size() && !unicode::is_decimal(in[i]) && unicode::is_bleu_punct(in[i + 1])) {
      a += in[i];
      a += U' ';
      a += in[i + 1];
      a += U' ';
      i += 2;
    } else {
      a += in[i++];
    }
  }
  std::u32string b;
  b.reserve(a.size() * 2);
  i = 0;
  while (i < a.size()) {
    if (i + 1 < a.size() && unicode::is_bleu_punct(a[i]) && !unicode::is_decimal(a[i + 1])) {
      b += U' ';
      b += a[i];
      b += U' ';
      b += a[i + 1];
      i += 2;
    } else {
      b += a[i++];
    }
  }
  std::u32string c;
  c.reserve(b.size() * 2);
  for (char32_t cp : b) {
    if (unicode::is_bleu_symbol(cp)) {
      c += U' ';
      c += cp;
      c += U' ';
    } else {
      c += cp;
    }
  }
  return std::string(unicode::trim(unicode::encode(c)));
}

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts extract_ngrams(const std::vector<std::string_view>& toks, int max_order) {
  NgramCounts out;
  for (int n = 1; n <= max_order; ++n) {
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      std::string key(toks[i]);
      for (int k = 1; k < n; ++k) {
        key += ' ';
        key += toks[i + k];
      }
      ++out[key];
    }
  }
  return out;
}

int order_of(const std::string& ngram) {
  return 1 + static_cast<int>(std::count(ngram.begin(), ngram.end(), ' '));
}

double floored_log(double x) { return x == 0.0 ? -9999999999.0 : std::log(x); }

}  // namespace

BleuResult corpus_bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                       const BleuConfig& cfg) {
  if (hypotheses.size() != references.size()) {
    throw Error("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                std::to_string(references.size()) + " references");
  }
  if (hypotheses.empty()) throw Error("bleu: no hypotheses");
  if (cfg.max_ngram_order < 1) throw Error("bleu: max_ngram_order must be positive");
  const auto order = static_cast<std::size_t>(cfg.max_ngram_order);

  BleuResult r;
  r.counts.assign(order, 0);
  r.totals.assign(order, 0);
  bool any_hypothesis_token = false;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = tokenize_intl(unicode::rtrim(hypotheses[s]));
    const auto ref = tokenize_intl(unicode::rtrim(references[s]));
    const auto hyp_toks = unicode::split_whitespace(hyp);
    const auto ref_toks = unicode::split_whitespace(ref);
    any_hypothesis_token = any_hypothesis_token || !hyp_toks.empty();
    r.sys_len += hyp_toks.size();
    r.ref_len += ref_toks.size();
    const auto ref_ngrams = extract_ngrams(ref_toks, cfg.max_ngram_order);
    for (const auto& [ngram, count] : extract_ngrams(hyp_toks, cfg.max_ngram_order)) {
      const auto n = static_cast<std::size_t>(order_of(ngram));
      const auto it = ref_ngrams.find(ngram);
      r.counts[n - 1] += std::min(count, it == ref_ngrams.end() ? std::size_t{0} : it->second);
      r.totals[n - 1] += count;
    }
  }
  if (!any_hypothesis_token) throw Error("bleu: all hypotheses are empty");

  r.precisions.assign(order, 0.0);
  double smooth = 1.0;
  for (std::size_t n = 0; n < order; ++n) {
    if (r.totals[n] == 0) break;
    if (r.counts[n] == 0) {
      smooth *= 2;
      r.precisions[n] = 100.0 / (smooth * static_cast<double>(r.totals[n]));
    } else {
      r.precisions[n] = 100.0 * static_cast<double>(r.counts[n]) / static_cast<double>(r.totals[n]);
    }
  }
  if (r.sys_len < r.ref_len) {
    r.brevity_penalty = r.sys_len > 0 ? std::exp(1.0 - static_cast<double>(r.ref_len) / static_cast<double>(r.sys_len)) : 0.0;
  }
  double log_sum = 0;
  for (double p : r.precisions) log_sum += floored_log(p);
  r.score = r.brevity_penalty * std::exp(log_sum / static_cast<double>(order));
  return r;
}

std::string bleu_signature(const BleuConfig& cfg, std::string_view langpair, std::string_view test_set) {
  std::string sig = "case.mixed";
  if (!langpair.empty()) sig += "+lang." + std::string(langpair);
  sig += "+numrefs.1+smooth.exp";
  if (!test_set.empty()) sig += "+test." + std::string(test_set);
  sig += "+tok.intl+version." + std::string(kBleuVersion);
  if (cfg.max_ngram_order != 4) sig += "+order." + std::to_string(cfg.max_ngram_order);
  return sig;
}

std::string format_bleu(const BleuResult& r, std::string_view signature) {
  std::string out = "BLEU+" + std::string(signature);
  char buf[256];
  std::snprintf(buf, sizeof buf, " = %.2f ", r.score);
  out += buf;
  for (std::size_t n = 0; n < r.precisions.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%s%.1f", n ? "/" : "", r.precisions[n]);
    out += buf;
  }
  const double ratio = r.ref_len ? static_cast<double>(r.sys_len) / static_cast<double>(r.ref_len) : 0.0;
  std::snprintf(buf, sizeof buf, " (BP = %.3f ratio = %.3f hyp_len = %zu ref_len = %zu)", r.brevity_penalty, ratio,
                r.sys_len, r.ref_len);
  out += buf;
  return out;
}

}  // namespace tagmt::metrics
