#include "tagmt/subword.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>

#include "tagmt/common.hpp"
#include "tagmt/unicode.hpp"

namespace tagmt::subword {
namespace {

constexpr std::string_view kMagic = "#tagmt-bpe";
constexpr int kFormatVersion = 1;

std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> symbols;
  for (char32_t cp : unicode::decode(word)) {
    symbols.emplace_back();
    unicode::append_utf8(symbols.back(), cp);
  }
  if (!symbols.empty()) symbols.back().append(kEndOfWord);
  return symbols;
}

// Interned learning state.
class Learner {
 public:
  Learner(const std::map<std::string, std::int64_t>& word_freq, std::size_t target, std::vector<std::string> reserved)
      : target_(target), reserved_(std::move(reserved)) {
    for (const auto& [word, freq] : word_freq) {
      std::vector<int> ids;
      for (auto& s : initial_symbols(word)) ids.push_back(intern(s));
      words_.push_back(std::move(ids));
      freq_.push_back(freq);
    }
    for (const auto& s : symbols_) base_.insert(s);
    vocab_ = base_;
    for (const auto& r : reserved_) vocab_.insert(r);
    if (target_ <= vocab_.size()) {
      throw Error("learn_bpe: target vocabulary size " + std::to_string(target_) +
                  " does not exceed the initial symbol inventory (" + std::to_string(vocab_.size()) +
                  " including reserved tokens)");
    }
  }

  BpeModel run() {
    for (std::size_t w = 0; w < words_.size(); ++w) add_word_pairs(w, +1);
    for (const auto& [key, count] : counts_) push(key);

    std::vector<BpeModel::Merge> merges;
    std::vector<std::uint32_t> stamp(words_.size(), 0);
    std::uint32_t epoch = 0;
    while (vocab_.size() < target_) {
      const auto best = pop_best();
      if (!best) {
        throw Error("learn_bpe: target vocabulary size " + std::to_string(target_) +
                    " unreachable; corpus exhausted at " + std::to_string(vocab_.size()) + " symbols");
      }
      const int left = static_cast<int>(*best >> 32);
      const int right = static_cast<int>(*best & 0xffffffffU);
      const int merged = intern(symbols_[left] + symbols_[right]);
      vocab_.insert(symbols_[merged]);
      merges.emplace_back(symbols_[left], symbols_[right]);

      ++epoch;
      touched_.clear();
      const auto occurrences = std::move(where_[*best]);
      where_.erase(*best);
      for (std::size_t w : occurrences) {
        if (stamp[w] == epoch) continue;
        stamp[w] = epoch;
        auto& ids = words_[w];
        if (!contains_pair(ids, left, right)) continue;
        add_word_pairs(w, -1);
        std::vector<int> next;
        next.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (i + 1 < ids.size() && ids[i] == left && ids[i + 1] == right) {
            next.push_back(merged);
            ++i;
          } else {
            next.push_back(ids[i]);
          }
        }
        ids = std::move(next);
        add_word_pairs(w, +1);
      }
      for (auto key : touched_) push(key);
    }
    return BpeModel(std::move(merges), reserved_, target_, base_);
  }

 private:
  struct Entry {
    std::int64_t count;
    std::uint64_t key;
  };

  static std::uint64_t pair_key(int a, int b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  }

  static bool contains_pair(const std::vector<int>& ids, int a, int b) {
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      if (ids[i] == a && ids[i + 1] == b) return true;
    }
    return false;
  }

  int intern(const std::string& s) {
    auto [it, inserted] = ids_.emplace(s, static_cast<int>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  void add_word_pairs(std::size_t w, int sign) {
    const auto& ids = words_[w];
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      const auto key = pair_key(ids[i], ids[i + 1]);
      counts_[key] += sign * freq_[w];
      touched_.push_back(key);
      if (sign > 0) where_[key].push_back(w);
    }
  }

  // Max count first; ties go to the lexicographically smaller pair.
  bool worse(const Entry& a, const Entry& b) const {
    if (a.count != b.count) return a.count < b.count;
    const auto& al = symbols_[a.key >> 32];
    const auto& bl = symbols_[b.key >> 32];
    if (al != bl) return al > bl;
    return symbols_[a.key & 0xffffffffU] > symbols_[b.key & 0xffffffffU];
  }

  void push(std::uint64_t key) {
    const auto it = counts_.find(key);
    if (it == counts_.end() || it->second <= 0) return;
    heap_.push_back({it->second, key});
    std::push_heap(heap_.begin(), heap_.end(), [this](const Entry& a, const Entry& b) { return worse(a, b); });
  }

  std::optional<std::uint64_t> pop_best() {
    const auto cmp = [this](const Entry& a, const Entry& b) { return worse(a, b); };
    while (!heap_.empty()) {
      std::pop_heap(heap_.begin(), heap_.end(), cmp);
      const Entry top = heap_.back();
      heap_.pop_back();
      const auto it = counts_.find(top.key);
      if (it != counts_.end() && it->second == top.count && top.count > 0) {
        counts_.erase(it);
        return top.key;
      }
    }
    return std::nullopt;
  }

  std::size_t target_;
  std::vector<std::string> reserved_;
  std::vector<std::vector<int>> words_;
  std::vector<std::int64_t> freq_;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
  std::set<std::string> base_;
  std::set<std::string> vocab_;
  std::unordered_map<std::uint64_t, std::int64_t> counts_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> where_;
  std::vector<std::uint64_t> touched_;
  std::vector<Entry> heap_;
};

BpeModel learn_from_words(const std::map<std::string, std::int64_t>& word_freq, std::size_t target,
                          const std::vector<std::string>& reserved) {
  if (word_freq.empty()) throw Error("learn_bpe: corpus has no words");
  return Learner(word_freq, target, reserved).run();
}

void count_words(std::string_view line, const std::vector<std::string>& reserved,
                 std::map<std::string, std::int64_t>& freq) {
  for (auto word : unicode::split_whitespace(line)) {
    if (std::find(reserved.begin(), reserved.end(), word) != reserved.end()) continue;
    ++freq[std::string(word)];
  }
}

}  // namespace

BpeModel::BpeModel(std::vector<Merge> merges, std::vector<std::string> reserved, std::size_t target_vocab_size,
                   std::set<std::string> base_symbols)
    : merges_(std::move(merges)),
      reserved_(std::move(reserved)),
      target_vocab_size_(target_vocab_size),
      base_symbols_(std::move(base_symbols)) {
  vocab_ = base_symbols_;
  for (const auto& r : reserved_) {
    if (r.empty() || std::any_of(r.begin(), r.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n'; })) {
      throw Error("reserved token must be non-empty and whitespace-free");
    }
    vocab_.insert(r);
  }
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const auto& [l, r] = merges_[i];
    if (is_reserved(l) || is_reserved(r)) throw Error("reserved token '" + (is_reserved(l) ? l : r) + "' inside a merge");
    rank_.emplace(merges_[i], i);
    vocab_.insert(l);
    vocab_.insert(r);
    vocab_.insert(l + r);
  }
}

bool BpeModel::is_reserved(std::string_view token) const {
  return std::find(reserved_.begin(), reserved_.end(), token) != reserved_.end();
}

std::vector<std::string> BpeModel::segment_word(std::string_view word) const {
  if (is_reserved(word)) return {std::string(word)};
  auto symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find({symbols[i], symbols[i + 1]});
      if (it != rank_.end() && it->second < best_rank) {
        best_rank = it->second;
        best_at = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const std::string left = symbols[best_at];
    const std::string right = symbols[best_at + 1];
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        next.push_back(left + right);
        ++i;
      } else {
        next.push_back(std::move(symbols[i]));
      }
    }
    symbols = std::move(next);
  }
  if (!symbols.empty()) symbols.back().resize(symbols.back().size() - kEndOfWord.size());
  return symbols;
}

std::string BpeModel::apply(std::string_view line) const {
  std::string out;
  out.reserve(line.size() * 2);
  const auto chars = unicode::decode(line);
  std::size_t i = 0;
  while (i < chars.size()) {
    std::size_t j = i;
    if (unicode::is_space(chars[i])) {
      while (j < chars.size() && unicode::is_space(chars[j])) ++j;
      out += unicode::encode(std::u32string_view(chars).substr(i, j - i));
    } else {
      while (j < chars.size() && !unicode::is_space(chars[j])) ++j;
      const auto pieces = segment_word(unicode::encode(std::u32string_view(chars).substr(i, j - i)));
      for (std::size_t k = 0; k < pieces.size(); ++k) {
        if (k > 0) out.append(kContinuation).push_back(' ');
        out += pieces[k];
      }
    }
    i = j;
  }
  return out;
}

std::size_t BpeModel::count_subwords(std::string_view line) const {
  std::size_t n = 0;
  for (auto word : unicode::split_whitespace(line)) n += segment_word(word).size();
  return n;
}

void BpeModel::save(std::ostream& out) const {
  out << kMagic << "\tversion=" << kFormatVersion << "\tvocab_size=" << target_vocab_size_
      << "\tend_of_word=" << kEndOfWord << "\tcontinuation=" << kContinuation
      << "\tbase_symbols=" << base_symbols_.size() << "\tmerges=" << merges_.size() << "\treserved=";
  for (std::size_t i = 0; i < reserved_.size(); ++i) out << (i ? " " : "") << reserved_[i];
  out << '\n';
  for (const auto& s : base_symbols_) out << s << '\n';
  for (const auto& [l, r] : merges_) out << l << ' ' << r << '\n';
}

BpeModel BpeModel::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error("BPE model: missing header");
  std::map<std::string, std::string> fields;
  {
    std::istringstream hs(header);
    std::string field;
    std::getline(hs, field, '\t');
    if (field != kMagic) throw Error("BPE model: bad magic '" + field + "'");
    while (std::getline(hs, field, '\t')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw Error("BPE model: malformed header field '" + field + "'");
      fields[field.substr(0, eq)] = field.substr(eq + 1);
    }
  }
  const auto need = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error("BPE model: header lacks '" + key + "'");
    return it->second;
  };
  if (std::stoi(need("version")) != kFormatVersion) throw Error("BPE model: unsupported version " + need("version"));
  if (need("end_of_word") != kEndOfWord || need("continuation") != kContinuation) {
    throw Error("BPE model: sentinel mismatch");
  }
  const auto target = static_cast<std::size_t>(std::stoull(need("vocab_size")));
  const auto n_base = static_cast<std::size_t>(std::stoull(need("base_symbols")));
  const auto n_merges = static_cast<std::size_t>(std::stoull(need("merges")));
  std::vector<std::string> reserved;
  {
    std::istringstream rs(need("reserved"));
    std::string tok;
    while (rs >> tok) reserved.push_back(tok);
  }
  std::set<std::string> base;
  std::string line;
  for (std::size_t i = 0; i < n_base; ++i) {
    if (!std::getline(in, line)) throw Error("BPE model: truncated symbol list");
    base.insert(line);
  }
  std::vector<Merge> merges;
  merges.reserve(n_merges);
  for (std::size_t i = 0; i < n_merges; ++i) {
    if (!std::getline(in, line)) throw Error("BPE model: truncated merge list");
    const auto sp = line.find(' ');
    if (sp == std::string::npos || line.find(' ', sp + 1) != std::string::npos) {
      throw Error("BPE model: malformed merge on line " + std::to_string(n_base + i + 2));
    }
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return BpeModel(std::move(merges), std::move(reserved), target, std::move(base));
}

void BpeModel::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save(out);
}

BpeModel BpeModel::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return load(in);
}

std::uint64_t BpeModel::fingerprint() const {
  std::ostringstream out;
  save(out);
  return fnv1a64(out.str());
}

BpeModel learn_bpe(const MonoCorpus& lines, std::size_t target_vocab_size, const std::vector<std::string>& reserved) {
  std::map<std::string, std::int64_t> freq;
  for (const auto& line : lines) count_words(line, reserved, freq);
  return learn_from_words(freq, target_vocab_size, reserved);
}

BpeModel learn_bpe(const ParallelCorpus& corpus, std::size_t target_vocab_size,
                   const std::vector<std::string>& reserved) {
  std::map<std::string, std::int64_t> freq;
  for (const auto& p : corpus) {
    count_words(p.source, reserved, freq);
    count_words(p.target, reserved, freq);
  }
  return learn_from_words(freq, target_vocab_size, reserved);
}

std::string remove_bpe(std::string_view segmented) {
  std::string out;
  out.reserve(segmented.size());
  const std::string marker = std::string(kContinuation) + " ";
  std::size_t pos = 0;
  while (true) {
    const auto hit = segmented.find(marker, pos);
    if (hit == std::string_view::npos) {
      out.append(segmented.substr(pos));
      return out;
    }
    out.append(segmented.substr(pos, hit - pos));
    pos = hit + marker.size();
  }
}

}  // namespace tagmt::subword
