#include "tagmt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "tagmt/common.hpp"
#include "tagmt/unicode.hpp"

namespace tagmt {

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::SourceOriginal:
      return "src_orig";
    case Origin::TargetOriginal:
      return "trg_orig";
    case Origin::Unknown:
      break;
  }
  return "unknown";
}

Origin parse_origin(std::string_view text) {
  if (text == "src_orig") return Origin::SourceOriginal;
  if (text == "trg_orig") return Origin::TargetOriginal;
  if (text == "unknown" || text.empty()) return Origin::Unknown;
  throw Error("unknown origin label '" + std::string(text) + "'");
}

std::string_view to_string(Label label) { return label == Label::Original ? "original" : "translated"; }

Label parse_label(std::string_view text) {
  if (text == "original") return Label::Original;
  if (text == "translated") return Label::Translated;
  throw Error("unknown label '" + std::string(text) + "' (expected original or translated)");
}

}  // namespace tagmt

namespace tagmt::corpus {
namespace {

template <typename Item, typename Rule>
Filtered<Item> apply_rules(const std::vector<Item>& corpus, Rule&& rule) {
  Filtered<Item> out;
  out.stats.input_count = corpus.size();
  for (const auto& item : corpus) {
    // rule returns nullptr to keep, otherwise the name of the first violated rule
    const char* violated = rule(item);
    if (violated == nullptr) {
      out.items.push_back(item);
    } else {
      ++out.stats.dropped_by_rule[violated];
    }
  }
  out.stats.kept_count = out.items.size();
  return out;
}

struct PairHash {
  std::size_t operator()(const std::pair<std::string_view, std::string_view>& p) const {
    return fnv1a64(p.second, fnv1a64(p.first) ^ 0x1f);
  }
};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::size_t FilterStats::dropped() const {
  std::size_t n = 0;
  for (const auto& [rule, count] : dropped_by_rule) n += count;
  return n;
}

Filtered<std::string> dedup(const MonoCorpus& corpus) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(corpus.size());
  return apply_rules(corpus, [&](const std::string& line) -> const char* {
    return seen.insert(line).second ? nullptr : "duplicate";
  });
}

Filtered<SentencePair> dedup(const ParallelCorpus& corpus) {
  std::unordered_set<std::pair<std::string_view, std::string_view>, PairHash> seen;
  seen.reserve(corpus.size());
  return apply_rules(corpus, [&](const SentencePair& p) -> const char* {
    return seen.emplace(p.source, p.target).second ? nullptr : "duplicate";
  });
}

Filtered<SentencePair> filter_bitext(const ParallelCorpus& corpus, const SubwordCounter& count,
                                     std::size_t max_subwords, double max_ratio) {
  std::size_t line = 0;
  return apply_rules(corpus, [&](const SentencePair& p) -> const char* {
    ++line;
    const std::size_t src = count(p.source);
    const std::size_t trg = count(p.target);
    if (src == 0 || trg == 0) {
      throw Error("filter_bitext: empty side in pair " + std::to_string(line) +
                  " (length ratio undefined)");
    }
    if (src > max_subwords || trg > max_subwords) return "too_many_subwords";
    const double ratio = static_cast<double>(std::max(src, trg)) / static_cast<double>(std::min(src, trg));
    if (ratio > max_ratio) return "length_ratio";
    return nullptr;
  });
}

Filtered<std::string> filter_mono(const MonoCorpus& corpus, std::size_t max_tokens, std::size_t max_chars) {
  return apply_rules(corpus, [&](const std::string& line) -> const char* {
    if (unicode::count_tokens(line) > max_tokens) return "too_many_tokens";
    if (unicode::length(line) > max_chars) return "too_many_chars";
    return nullptr;
  });
}

Filtered<SentencePair> filter_backtranslated(const ParallelCorpus& corpus, std::size_t max_src_tokens,
                                             std::size_t max_src_chars) {
  return apply_rules(corpus, [&](const SentencePair& p) -> const char* {
    if (unicode::count_tokens(p.source) > max_src_tokens) return "source_too_many_tokens";
    if (unicode::length(p.source) > max_src_chars) return "source_too_many_chars";
    return nullptr;
  });
}

Filtered<SentencePair> filter_language(const ParallelCorpus& corpus, const LanguagePredicate& src_pred,
                                       const LanguagePredicate& trg_pred) {
  return apply_rules(corpus, [&](const SentencePair& p) -> const char* {
    if (p.source == p.target) return "identical_sides";
    if (!src_pred(p.source)) return "wrong_source_language";
    if (!trg_pred(p.target)) return "wrong_target_language";
    return nullptr;
  });
}

void CharProfileIdentifier::add_language(std::string name, const MonoCorpus& sample) {
  std::map<char32_t, double> counts;
  double total = 0;
  for (const auto& line : sample) {
    for (char32_t cp : unicode::decode(line)) {
      if (unicode::is_space(cp)) continue;
      counts[cp] += 1;
      total += 1;
    }
  }
  if (total == 0) throw Error("language sample for '" + name + "' has no characters");
  // add-one smoothing over the observed inventory plus one unseen bucket
  const double denom = total + static_cast<double>(counts.size()) + 1.0;
  Profile profile{std::move(name), {}, std::log(1.0 / denom)};
  for (const auto& [cp, c] : counts) profile.log_prob[cp] = std::log((c + 1.0) / denom);
  profiles_.push_back(std::move(profile));
}

const std::string& CharProfileIdentifier::identify(std::string_view text) const {
  if (profiles_.empty()) throw Error("language identifier has no profiles");
  const auto chars = unicode::decode(text);
  std::size_t best = 0;
  double best_score = -INFINITY;
  for (std::size_t i = 0; i < profiles_.size(); ++i) {
    const auto& p = profiles_[i];
    double score = 0;
    for (char32_t cp : chars) {
      if (unicode::is_space(cp)) continue;
      auto it = p.log_prob.find(cp);
      score += it == p.log_prob.end() ? p.unseen_log_prob : it->second;
    }
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return profiles_[best].name;
}

LanguagePredicate CharProfileIdentifier::predicate_for(const std::string& name) const {
  const bool known = std::any_of(profiles_.begin(), profiles_.end(),
                                 [&](const Profile& p) { return p.name == name; });
  if (!known) throw Error("language identifier has no profile named '" + name + "'");
  return [this, name](std::string_view text) { return identify(text) == name; };
}

MonoCorpus read_mono(std::istream& in) {
  MonoCorpus out;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    out.push_back(std::move(line));
  }
  return out;
}

namespace {
std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}
std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}
}  // namespace

MonoCorpus read_mono_file(const std::string& path) {
  auto in = open_in(path);
  return read_mono(in);
}

void write_mono(std::ostream& out, const MonoCorpus& corpus) {
  for (const auto& line : corpus) out << line << '\n';
}

void write_mono_file(const std::string& path, const MonoCorpus& corpus) {
  auto out = open_out(path);
  write_mono(out, corpus);
}

void validate(const SentencePair& pair, std::size_t line_number) {
  const auto where = line_number ? " at line " + std::to_string(line_number) : std::string();
  if (unicode::trim(pair.source).empty()) throw Error("empty source" + where);
  if (unicode::trim(pair.target).empty()) throw Error("empty target" + where);
  for (const auto* side : {&pair.source, &pair.target}) {
    if (side->find_first_of("\t\n") != std::string::npos) throw Error("tab or newline inside a sentence" + where);
  }
}

ParallelCorpus read_parallel_tsv(std::istream& in) {
  ParallelCorpus out;
  std::string line;
  std::size_t n = 0;
  const std::string tag_prefix = std::string(kTagToken) + " ";
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    const auto cols = split_tabs(line);
    if (cols.size() < 2 || cols.size() > 4) {
      throw Error("parallel TSV line " + std::to_string(n) + ": expected 2 to 4 columns, got " +
                  std::to_string(cols.size()));
    }
    SentencePair p;
    p.source = cols[0];
    p.target = cols[1];
    if (cols.size() >= 3) p.origin = parse_origin(cols[2]);
    if (cols.size() == 4) {
      if (cols[3] != "0" && cols[3] != "1") {
        throw Error("parallel TSV line " + std::to_string(n) + ": tag column must be 0 or 1");
      }
      p.tagged = cols[3] == "1";
    }
    if (p.source.starts_with(tag_prefix)) {
      p.source.erase(0, tag_prefix.size());
      p.tagged = true;
    }
    validate(p, n);
    out.push_back(std::move(p));
  }
  return out;
}

ParallelCorpus read_parallel_tsv_file(const std::string& path) {
  auto in = open_in(path);
  return read_parallel_tsv(in);
}

ParallelCorpus read_parallel_files(const std::string& source_path, const std::string& target_path) {
  const auto src = read_mono_file(source_path);
  const auto trg = read_mono_file(target_path);
  if (src.size() != trg.size()) {
    throw Error("parallel files differ in line count: " + std::to_string(src.size()) + " vs " +
                std::to_string(trg.size()));
  }
  ParallelCorpus out;
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    SentencePair p{src[i], trg[i]};
    validate(p, i + 1);
    out.push_back(std::move(p));
  }
  return out;
}

void write_parallel_tsv(std::ostream& out, const ParallelCorpus& corpus, TsvForm form) {
  for (const auto& p : corpus) {
    if (form == TsvForm::Inline && p.tagged) out << kTagToken << ' ';
    out << p.source << '\t' << p.target << '\t' << to_string(p.origin);
    if (form == TsvForm::Tagged) out << '\t' << (p.tagged ? '1' : '0');
    out << '\n';
  }
}

void write_parallel_tsv_file(const std::string& path, const ParallelCorpus& corpus, TsvForm form) {
  auto out = open_out(path);
  write_parallel_tsv(out, corpus, form);
}

LabeledCorpus read_labeled(std::istream& in) {
  LabeledCorpus out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    strip_cr(line);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error("labeled TSV line " + std::to_string(n) + ": expected label<TAB>text");
    LabeledSentence s{line.substr(tab + 1), parse_label(std::string_view(line).substr(0, tab))};
    if (unicode::trim(s.text).empty()) throw Error("labeled TSV line " + std::to_string(n) + ": empty text");
    if (s.text.find('\t') != std::string::npos) throw Error("labeled TSV line " + std::to_string(n) + ": extra column");
    out.push_back(std::move(s));
  }
  return out;
}

LabeledCorpus read_labeled_file(const std::string& path) {
  auto in = open_in(path);
  return read_labeled(in);
}

void write_labeled(std::ostream& out, const LabeledCorpus& corpus) {
  for (const auto& s : corpus) out << to_string(s.label) << '\t' << s.text << '\n';
}

void write_labeled_file(const std::string& path, const LabeledCorpus& corpus) {
  auto out = open_out(path);
  write_labeled(out, corpus);
}

void write_filter_report(std::ostream& out, const FilterStats& stats) {
  out << "input\t" << stats.input_count << '\n' << "kept\t" << stats.kept_count << '\n';
  for (const auto& [rule, count] : stats.dropped_by_rule) out << rule << '\t' << count << '\n';
}

}  // namespace tagmt::corpus
