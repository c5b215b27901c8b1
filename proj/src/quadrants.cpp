#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "tagmt/toymt.hpp"
#include "tagmt/unicode.hpp"

namespace tagmt::toymt {

// --- spec ------------------------------------------------------------------

void QuadrantSpec::validate() const {
  if (source_vocab_size == 0) throw Error("quadrant spec: source_vocab_size must be positive");
  if (!(synonym_probability >= 0 && synonym_probability <= 1)) {
    throw Error("quadrant spec: synonym_probability must lie in [0, 1]");
  }
  if (min_length == 0 || min_length > max_length) throw Error("quadrant spec: need 0 < min_length <= max_length");
  if (src_orig_count == 0 || trg_orig_count == 0 || zero_shot_count == 0 || trg_orig_test_count == 0 ||
      dev_count < 2) {
    throw Error("quadrant spec: split counts must be positive (dev_count at least 2)");
  }
}

std::string QuadrantSpec::to_text() const {
  std::ostringstream out;
  char p[32];
  std::snprintf(p, sizeof p, "%.17g", synonym_probability);
  out << "source_vocab_size = " << source_vocab_size << '\n'
      << "synonym_probability = " << p << '\n'
      << "reorder = " << synth::to_string(reorder) << '\n'
      << "min_length = " << min_length << '\n'
      << "max_length = " << max_length << '\n'
      << "src_orig_count = " << src_orig_count << '\n'
      << "trg_orig_count = " << trg_orig_count << '\n'
      << "zero_shot_count = " << zero_shot_count << '\n'
      << "trg_orig_test_count = " << trg_orig_test_count << '\n'
      << "dev_count = " << dev_count << '\n'
      << "seed = " << seed << '\n';
  return out.str();
}

namespace {

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != value.size() || value.front() == '-') {
    throw Error("quadrant spec: '" + key + "' needs a non-negative integer, got '" + value + "'");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

QuadrantSpec QuadrantSpec::parse(std::istream& in) {
  QuadrantSpec s;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = unicode::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw Error("quadrant spec line " + std::to_string(n) + ": expected key = value");
    const std::string key(unicode::trim(body.substr(0, eq)));
    const std::string value(unicode::trim(body.substr(eq + 1)));
    if (key == "source_vocab_size") s.source_vocab_size = parse_count(key, value);
    else if (key == "synonym_probability") {
      char* end = nullptr;
      s.synonym_probability = std::strtod(value.c_str(), &end);
      if (value.empty() || *end != '\0') throw Error("quadrant spec: bad synonym_probability '" + value + "'");
    } else if (key == "reorder") s.reorder = synth::parse_reorder(value);
    else if (key == "min_length") s.min_length = parse_count(key, value);
    else if (key == "max_length") s.max_length = parse_count(key, value);
    else if (key == "src_orig_count") s.src_orig_count = parse_count(key, value);
    else if (key == "trg_orig_count") s.trg_orig_count = parse_count(key, value);
    else if (key == "zero_shot_count") s.zero_shot_count = parse_count(key, value);
    else if (key == "trg_orig_test_count") s.trg_orig_test_count = parse_count(key, value);
    else if (key == "dev_count") s.dev_count = parse_count(key, value);
    else if (key == "seed") s.seed = parse_count(key, value);
    else throw Error("quadrant spec line " + std::to_string(n) + ": unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

QuadrantSpec QuadrantSpec::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return parse(in);
}

// --- lexicon ---------------------------------------------------------------

std::map<std::string, std::string> Lexicon::forward() const {
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < source.size(); ++i) m.emplace(source[i], literal[i]);
  return m;
}

std::map<std::string, std::string> Lexicon::backward() const {
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < source.size(); ++i) {
    m.emplace(literal[i], source[i]);
    m.emplace(synonym[i], source[i]);
  }
  return m;
}

Lexicon make_lexicon(std::size_t concepts, std::uint64_t seed) {
  // source and target words use disjoint consonant inventories
  static constexpr std::string_view kVowels = "aeiou";
  static constexpr std::string_view kSourceConsonants = "ptkbdg";
  static constexpr std::string_view kTargetConsonants = "mnlrsvz";
  Rng rng(derive_seed(seed, "lexicon"));
  std::set<std::string> used;
  auto draw = [&](std::string_view consonants) {
    for (std::size_t attempt = 0; attempt < 1000; ++attempt) {
      const std::size_t syllables = 2 + rng.below(2);
      std::string w;
      for (std::size_t k = 0; k < syllables; ++k) {
        w += consonants[rng.below(consonants.size())];
        w += kVowels[rng.below(kVowels.size())];
      }
      if (used.insert(w).second) return w;
    }
    throw Error("lexicon collision: cannot draw " + std::to_string(concepts) + " distinct words per lexicon");
  };
  Lexicon lex;
  for (std::size_t i = 0; i < concepts; ++i) lex.source.push_back(draw(kSourceConsonants));
  for (std::size_t i = 0; i < concepts; ++i) lex.literal.push_back(draw(kTargetConsonants));
  for (std::size_t i = 0; i < concepts; ++i) lex.synonym.push_back(draw(kTargetConsonants));
  return lex;
}

double synonym_rate(const std::vector<std::string>& lines, const Lexicon& lexicon) {
  std::map<std::string, bool> kind;  // word -> is synonym
  for (const auto& w : lexicon.literal) kind.emplace(w, false);
  for (const auto& w : lexicon.synonym) kind.emplace(w, true);
  std::size_t concept_tokens = 0, synonyms = 0;
  for (const auto& line : lines) {
    for (auto tok : unicode::split_whitespace(line)) {
      auto it = kind.find(std::string(tok));
      if (it == kind.end()) continue;
      ++concept_tokens;
      synonyms += it->second;
    }
  }
  return concept_tokens ? static_cast<double>(synonyms) / static_cast<double>(concept_tokens) : 0.0;
}

// --- generation --------------------------------------------------------------

namespace {

class Generator {
 public:
  Generator(const QuadrantSpec& spec, const Lexicon& lex) : spec_(spec), lex_(lex) {}

  std::vector<std::size_t> concepts(Rng& rng) const {
    const std::size_t n = spec_.min_length + rng.below(spec_.max_length - spec_.min_length + 1);
    std::vector<std::size_t> c(n);
    for (auto& x : c) x = rng.below(spec_.source_vocab_size);
    return c;
  }

  std::vector<std::size_t> reorder(std::vector<std::size_t> c) const {
    switch (spec_.reorder) {
      case synth::Reorder::None: break;
      case synth::Reorder::Reverse: std::reverse(c.begin(), c.end()); break;
      case synth::Reorder::SwapPairs:
        for (std::size_t i = 0; i + 1 < c.size(); i += 2) std::swap(c[i], c[i + 1]);
        break;
    }
    return c;
  }

  static std::string render(const std::vector<std::size_t>& c, const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i) out += ' ';
      out += words[c[i]];
    }
    return out;
  }

  std::string natural(const std::vector<std::size_t>& ordered, Rng& rng) const {
    std::string out;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      if (i) out += ' ';
      out += rng.bernoulli(spec_.synonym_probability) ? lex_.synonym[ordered[i]] : lex_.literal[ordered[i]];
    }
    return out;
  }

  SentencePair source_original(Rng& rng) const {
    const auto c = concepts(rng);
    return {render(c, lex_.source), render(c, lex_.literal), Origin::SourceOriginal, false};
  }

  SentencePair target_original(Rng& rng) const {
    const auto ordered = reorder(concepts(rng));
    auto y = natural(ordered, rng);
    return {render(ordered, lex_.source), std::move(y), Origin::TargetOriginal, false};
  }

 private:
  const QuadrantSpec& spec_;
  const Lexicon& lex_;
};

}  // namespace

ParallelCorpus QuadrantData::training() const {
  ParallelCorpus out = src_orig;
  out.insert(out.end(), trg_orig.begin(), trg_orig.end());
  return out;
}

QuadrantData generate_quadrant_data(const QuadrantSpec& spec) {
  spec.validate();
  QuadrantData d;
  d.lexicon = make_lexicon(spec.source_vocab_size, spec.seed);
  const Generator gen(spec, d.lexicon);

  Rng src_rng(derive_seed(spec.seed, "src_orig"));
  for (std::size_t i = 0; i < spec.src_orig_count; ++i) d.src_orig.push_back(gen.source_original(src_rng));
  Rng trg_rng(derive_seed(spec.seed, "trg_orig"));
  for (std::size_t i = 0; i < spec.trg_orig_count; ++i) d.trg_orig.push_back(gen.target_original(trg_rng));

  Rng dev_rng(derive_seed(spec.seed, "dev"));
  for (std::size_t i = 0; i < spec.dev_count; ++i) {
    d.dev.push_back(i < spec.dev_count / 2 ? gen.source_original(dev_rng) : gen.target_original(dev_rng));
  }

  Rng zs_rng(derive_seed(spec.seed, "zero_shot"));
  for (std::size_t i = 0; i < spec.zero_shot_count; ++i) {
    const auto c = gen.concepts(zs_rng);
    d.zero_shot.pairs.push_back(
        {Generator::render(c, d.lexicon.source), Generator::render(c, d.lexicon.literal), Origin::SourceOriginal, false});
    d.zero_shot.natural_references.push_back(gen.natural(gen.reorder(c), zs_rng));
  }

  Rng test_rng(derive_seed(spec.seed, "trg_orig_test"));
  for (std::size_t i = 0; i < spec.trg_orig_test_count; ++i) d.trg_orig_test.push_back(gen.target_original(test_rng));
  return d;
}

}  // namespace tagmt::toymt
