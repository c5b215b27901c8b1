#include "tagmt/synthdata.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <istream>

#include "tagmt/common.hpp"
#include "tagmt/unicode.hpp"

extern char** environ;

namespace tagmt::synth {

std::string_view to_string(Direction d) {
  return d == Direction::SourceToTarget ? "source-to-target" : "target-to-source";
}

Reorder parse_reorder(std::string_view name) {
  if (name == "none" || name == "identity") return Reorder::None;
  if (name == "reverse") return Reorder::Reverse;
  if (name == "swap-pairs") return Reorder::SwapPairs;
  throw Error("unknown reorder rule '" + std::string(name) + "' (expected none, reverse or swap-pairs)");
}

std::string_view to_string(Reorder r) {
  switch (r) {
    case Reorder::None: return "none";
    case Reorder::Reverse: return "reverse";
    case Reorder::SwapPairs: return "swap-pairs";
  }
  return "none";
}

// --- toy translator --------------------------------------------------------

ToyTranslator::ToyTranslator(Direction direction, Options options)
    : Translator(direction), options_(std::move(options)) {
  if (!(options_.dropout >= 0 && options_.dropout < 1)) throw Error("toy translator: dropout must lie in [0, 1)");
  for (const auto& [from, to] : options_.lexicon) {
    if (from.empty() || to.empty() || unicode::count_tokens(from) != 1 || unicode::count_tokens(to) != 1) {
      throw Error("toy translator: lexicon entries must be single tokens ('" + from + "' -> '" + to + "')");
    }
  }
}

std::unique_ptr<ToyTranslator> ToyTranslator::identity(Direction direction) {
  return std::make_unique<ToyTranslator>(direction, Options{});
}

std::string ToyTranslator::translate_line(std::string_view line) const {
  std::vector<std::string> tokens;
  for (auto tok : unicode::split_whitespace(line)) {
    auto it = options_.lexicon.find(std::string(tok));
    tokens.emplace_back(it == options_.lexicon.end() ? std::string(tok) : it->second);
  }
  switch (options_.reorder) {
    case Reorder::None: break;
    case Reorder::Reverse: std::reverse(tokens.begin(), tokens.end()); break;
    case Reorder::SwapPairs:
      for (std::size_t i = 0; i + 1 < tokens.size(); i += 2) std::swap(tokens[i], tokens[i + 1]);
      break;
  }
  if (options_.dropout > 0 && tokens.size() > 1) {
    Rng rng(derive_seed(options_.seed, line));
    std::vector<std::string> kept;
    for (auto& t : tokens) {
      if (!rng.bernoulli(options_.dropout)) kept.push_back(std::move(t));
    }
    // never drop a whole sentence; keep its first token instead
    if (kept.empty()) kept.push_back(std::move(tokens.front()));
    tokens = std::move(kept);
  }
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> ToyTranslator::translate(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(translate_line(l));
  return out;
}

std::map<std::string, std::string> read_lexicon(std::istream& in) {
  std::map<std::string, std::string> lex;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto body = unicode::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error("lexicon line " + std::to_string(n) + ": expected from<TAB>to");
    }
    auto from = line.substr(0, tab);
    if (!lex.emplace(from, line.substr(tab + 1)).second) {
      throw Error("lexicon line " + std::to_string(n) + ": duplicate entry for '" + from + "'");
    }
  }
  return lex;
}

std::map<std::string, std::string> read_lexicon_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return read_lexicon(in);
}

std::map<std::string, std::string> invert_lexicon(const std::map<std::string, std::string>& lexicon) {
  std::map<std::string, std::string> out;
  for (const auto& [from, to] : lexicon) out.emplace(to, from);  // map order: first source wins
  return out;
}

// --- subprocess bridge -----------------------------------------------------

SubprocessTranslator::SubprocessTranslator(Direction direction, std::string command)
    : Translator(direction), command_(std::move(command)) {
  if (command_.empty()) throw Error("subprocess translator: empty command");
}

namespace {

struct PipePair {
  int fd[2] = {-1, -1};
  PipePair() {
    if (pipe(fd) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  }
  ~PipePair() {
    close_end(0);
    close_end(1);
  }
  void close_end(int i) {
    if (fd[i] >= 0) close(fd[i]);
    fd[i] = -1;
  }
};

class SigpipeGuard {
 public:
  SigpipeGuard() {
    struct sigaction ignore {};
    ignore.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &ignore, &saved_);
  }
  ~SigpipeGuard() { sigaction(SIGPIPE, &saved_, nullptr); }

 private:
  struct sigaction saved_ {};
};

}  // namespace

std::vector<std::string> SubprocessTranslator::translate(const std::vector<std::string>& lines) {
  std::string input;
  for (const auto& l : lines) {
    if (l.find('\n') != std::string::npos) throw Error("subprocess translator: input line contains a newline");
    input += l;
    input += '\n';
  }
  SigpipeGuard guard;
  PipePair to_child, from_child;
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child.fd[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child.fd[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, to_child.fd[1]);
  posix_spawn_file_actions_addclose(&actions, from_child.fd[0]);
  const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char**>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw Error("cannot start translator '" + command_ + "': " + std::strerror(rc));
  to_child.close_end(0);
  from_child.close_end(1);

  fcntl(to_child.fd[1], F_SETFL, O_NONBLOCK);
  std::size_t written = 0;
  if (input.empty()) to_child.close_end(1);
  std::string output;
  char buf[65536];
  while (from_child.fd[0] >= 0) {
    pollfd fds[2];
    int nfds = 0;
    fds[nfds++] = {from_child.fd[0], POLLIN, 0};
    if (to_child.fd[1] >= 0) fds[nfds++] = {to_child.fd[1], POLLOUT, 0};
    if (poll(fds, nfds, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = write(to_child.fd[1], input.data() + written, input.size() - written);
      if (n > 0) written += static_cast<std::size_t>(n);
      if (n < 0 && errno != EAGAIN) written = input.size();  // child stopped reading
      if (written == input.size()) to_child.close_end(1);
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      const ssize_t n = read(from_child.fd[0], buf, sizeof buf);
      if (n > 0) {
        output.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        from_child.close_end(0);
      }
    }
  }
  to_child.close_end(1);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error("translator '" + command_ + "' failed with status " +
                std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < output.size()) {
    auto end = output.find('\n', start);
    if (end == std::string::npos) end = output.size();
    std::string line = output.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
    start = end + 1;
  }
  return out;
}

// --- datasets --------------------------------------------------------------

std::vector<std::string> translate_batched(Translator& translator, const std::vector<std::string>& lines,
                                           std::size_t batch_size) {
  if (batch_size == 0) throw Error("translation batch size must be positive");
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (std::size_t start = 0, batch = 0; start < lines.size(); start += batch_size, ++batch) {
    const std::size_t end = std::min(lines.size(), start + batch_size);
    const std::vector<std::string> chunk(lines.begin() + static_cast<std::ptrdiff_t>(start),
                                         lines.begin() + static_cast<std::ptrdiff_t>(end));
    auto translated = translator.translate(chunk);
    if (translated.size() != chunk.size()) {
      throw Error("translator returned " + std::to_string(translated.size()) + " lines for " +
                  std::to_string(chunk.size()) + " in batch " + std::to_string(batch));
    }
    for (auto& t : translated) out.push_back(std::move(t));
  }
  return out;
}

namespace {

void require_text(const std::vector<std::string>& lines, const char* what) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (unicode::trim(lines[i]).empty()) throw Error(std::string(what) + " line " + std::to_string(i + 1) + " is empty");
  }
}

void require_direction(const Translator& t, Direction expected) {
  if (t.direction() != expected) {
    throw Error("translator direction is " + std::string(to_string(t.direction())) + ", expected " +
                std::string(to_string(expected)));
  }
}

}  // namespace

LabeledDataset build_ft_dataset(const MonoCorpus& source_mono, const MonoCorpus& target_mono,
                                Translator& source_to_target, std::size_t batch_size) {
  if (source_mono.empty() || target_mono.empty()) throw Error("build_ft_dataset: empty monolingual corpus");
  require_direction(source_to_target, Direction::SourceToTarget);
  const std::size_t n = std::min(source_mono.size(), target_mono.size());
  const MonoCorpus sources(source_mono.begin(), source_mono.begin() + static_cast<std::ptrdiff_t>(n));
  const MonoCorpus targets(target_mono.begin(), target_mono.begin() + static_cast<std::ptrdiff_t>(n));
  require_text(sources, "source monolingual");
  require_text(targets, "target monolingual");
  const auto translated = translate_batched(source_to_target, sources, batch_size);
  require_text(translated, "translated");
  LabeledDataset out;
  for (std::size_t i = 0; i < n; ++i) {
    out.sentences.push_back({target_mono[i], Label::Original});
    out.provenance.push_back({i, "target_mono"});
    out.sentences.push_back({translated[i], Label::Translated});
    out.provenance.push_back({i, "source_mono"});
  }
  return out;
}

LabeledDataset build_rtt_dataset(const MonoCorpus& target_mono, Translator& target_to_source,
                                 Translator& source_to_target, std::size_t batch_size, bool keep_intermediate) {
  if (target_mono.empty()) throw Error("build_rtt_dataset: empty monolingual corpus");
  require_direction(target_to_source, Direction::TargetToSource);
  require_direction(source_to_target, Direction::SourceToTarget);
  require_text(target_mono, "target monolingual");
  auto intermediate = translate_batched(target_to_source, target_mono, batch_size);
  const auto round_trip = translate_batched(source_to_target, intermediate, batch_size);
  require_text(round_trip, "round-trip translated");
  LabeledDataset out;
  for (std::size_t i = 0; i < target_mono.size(); ++i) {
    out.sentences.push_back({target_mono[i], Label::Original});
    out.provenance.push_back({i, "target_mono"});
    out.sentences.push_back({round_trip[i], Label::Translated});
    out.provenance.push_back({i, "target_mono"});
  }
  if (keep_intermediate) out.intermediate = std::move(intermediate);
  return out;
}

}  // namespace tagmt::synth
