#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tagmt/tagging.hpp"
#include "tagmt/textmetrics.hpp"
#include "tagmt/toymt.hpp"

namespace tagmt::harness {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

enum class Half { SourceOriginal = 0, TargetOriginal = 1 };
enum class Mode { Natural = 0, Translationese = 1 };
std::string_view to_string(Half h);
std::string_view to_string(Mode m);

/// Test pairs with origin labels. `pairs[i].target` is the reference;
/// `natural_references`, when non-empty, is a second reference per pair.
struct GridTestSet {
  ParallelCorpus pairs;
  std::vector<std::string> natural_references;

  /// Zero-shot sources (source-original) followed by the target-original test split.
  static GridTestSet from_quadrants(const toymt::QuadrantData& data);
};

struct GridCell {
  Half half = Half::SourceOriginal;
  Mode mode = Mode::Natural;
  std::vector<std::string> outputs;
  double bleu = 0;
  std::optional<double> natural_reference_bleu;
  metrics::MetricReport metrics;
};

struct GridReport {
  std::array<GridCell, 4> cells;  // [half][mode]
  double combined_bleu = 0;       // over concatenated matched-domain decodes
  double combined_macro_bleu = 0; // mean of the two matched cells
  std::string model_checksum;
  std::string policy;
  std::uint64_t seed = 0;

  const GridCell& cell(Half h, Mode m) const { return cells[static_cast<std::size_t>(h) * 2 + static_cast<std::size_t>(m)]; }
  GridCell& cell(Half h, Mode m) { return cells[static_cast<std::size_t>(h) * 2 + static_cast<std::size_t>(m)]; }
  /// Lexical variety of natural minus translationese decodes on the source-original half.
  double tag_effect() const;

  std::string to_text() const;
  std::string to_json() const;
};

struct GridOptions {
  metrics::FunctionWordList function_words = metrics::FunctionWordList::builtin("en");
  std::size_t beam = 1;
  std::string policy = "unspecified";
  std::uint64_t seed = 0;
};

/// Matched domains: translationese decodes for source-original pairs, natural
/// decodes for target-original pairs. Throws Error on pairs without an origin
/// label or an empty half.
GridReport run_grid_eval(const toymt::ToyMtModel& model, const GridTestSet& test, const GridOptions& options = {});

/// BLEU that scores all-empty output as 0 instead of failing.
double bleu_or_zero(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

struct PolicyRun {
  std::string policy;
  tagging::TagStats stats;
  GridReport report;
};

struct PolicyComparison {
  std::vector<PolicyRun> runs;
  std::string to_text() const;
  std::string to_json() const;
};

/// Trains one toy model per policy on the same generated data (training pairs
/// re-tagged by each policy) and grid-evaluates each on the same test set.
PolicyComparison compare_policies(const toymt::QuadrantSpec& spec, const std::vector<tagging::TagPolicy>& policies,
                                  const toymt::ToyMtConfig& config, GridOptions options = {});

// --- manifest ------------------------------------------------------------

struct FileRecord {
  std::string path;
  std::string hash;  // FNV-1a 64 of the contents, hex
  std::uint64_t bytes = 0;
  bool operator==(const FileRecord&) const = default;
};

FileRecord hash_file(const std::string& path);

struct RunManifest {
  std::string toolkit_version{kToolkitVersion};
  std::vector<std::string> arguments;  // command line after the program name
  std::uint64_t seed = 0;
  std::string config;  // the --config file contents, verbatim
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  std::map<std::string, std::map<std::string, std::string>> stats;  // stage -> key -> value

  void add_input(const std::string& path) { inputs.push_back(hash_file(path)); }
  void add_output(const std::string& path) { outputs.push_back(hash_file(path)); }
  void set_stat(const std::string& stage, const std::string& key, const std::string& value) {
    stats[stage][key] = value;
  }

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
  void save_file(const std::string& path) const;
  static RunManifest load_file(const std::string& path);
};

}  // namespace tagmt::harness
