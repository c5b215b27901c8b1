#include "tagmt/harness.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

namespace tagmt::harness {

using nlohmann::ordered_json;

std::string_view to_string(Half h) { return h == Half::SourceOriginal ? "source-original" : "target-original"; }
std::string_view to_string(Mode m) { return m == Mode::Natural ? "natural" : "translationese"; }

GridTestSet GridTestSet::from_quadrants(const toymt::QuadrantData& data) {
  GridTestSet t;
  t.pairs = data.zero_shot.pairs;
  t.pairs.insert(t.pairs.end(), data.trg_orig_test.begin(), data.trg_orig_test.end());
  t.natural_references = data.zero_shot.natural_references;
  for (const auto& p : data.trg_orig_test) t.natural_references.push_back(p.target);
  return t;
}

double bleu_or_zero(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  for (const auto& h : hypotheses) {
    if (h.find_first_not_of(" \t") != std::string::npos) return metrics::corpus_bleu(hypotheses, references).score;
  }
  if (hypotheses.size() != references.size()) throw Error("BLEU: hypothesis and reference counts differ");
  return 0.0;
}

double GridReport::tag_effect() const {
  return cell(Half::SourceOriginal, Mode::Natural).metrics.lexical_variety -
         cell(Half::SourceOriginal, Mode::Translationese).metrics.lexical_variety;
}

GridReport run_grid_eval(const toymt::ToyMtModel& model, const GridTestSet& test, const GridOptions& options) {
  if (!test.natural_references.empty() && test.natural_references.size() != test.pairs.size()) {
    throw Error("grid eval: natural references must parallel the test pairs");
  }
  std::array<std::vector<std::size_t>, 2> halves;
  for (std::size_t i = 0; i < test.pairs.size(); ++i) {
    switch (test.pairs[i].origin) {
      case Origin::SourceOriginal: halves[0].push_back(i); break;
      case Origin::TargetOriginal: halves[1].push_back(i); break;
      case Origin::Unknown: throw Error("grid eval: test pair " + std::to_string(i + 1) + " has no origin label");
    }
  }
  for (Half h : {Half::SourceOriginal, Half::TargetOriginal}) {
    if (halves[static_cast<std::size_t>(h)].empty()) {
      throw Error("grid eval: the " + std::string(to_string(h)) + " half of the test set is empty");
    }
  }

  GridReport r;
  r.model_checksum = hex64(model.params().checksum());
  r.policy = options.policy;
  r.seed = options.seed;
  std::vector<std::string> matched_out, matched_ref;
  double macro = 0;
  for (Half h : {Half::SourceOriginal, Half::TargetOriginal}) {
    std::vector<std::string> sources, refs, natural_refs;
    for (auto i : halves[static_cast<std::size_t>(h)]) {
      sources.push_back(test.pairs[i].source);
      refs.push_back(test.pairs[i].target);
      if (!test.natural_references.empty()) natural_refs.push_back(test.natural_references[i]);
    }
    for (Mode m : {Mode::Natural, Mode::Translationese}) {
      auto& c = r.cell(h, m);
      c.half = h;
      c.mode = m;
      for (const auto& s : sources) c.outputs.push_back(model.decode(s, m == Mode::Natural, options.beam));
      c.bleu = bleu_or_zero(c.outputs, refs);
      if (!natural_refs.empty()) c.natural_reference_bleu = bleu_or_zero(c.outputs, natural_refs);
      c.metrics = metrics::measure(c.outputs, sources, options.function_words);
      c.metrics.bleu = c.bleu;
      const bool matched = (h == Half::SourceOriginal) == (m == Mode::Translationese);
      if (matched) {
        matched_out.insert(matched_out.end(), c.outputs.begin(), c.outputs.end());
        matched_ref.insert(matched_ref.end(), refs.begin(), refs.end());
        macro += c.bleu / 2;
      }
    }
  }
  r.combined_bleu = bleu_or_zero(matched_out, matched_ref);
  r.combined_macro_bleu = macro;
  return r;
}

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

ordered_json cell_json(const GridCell& c) {
  ordered_json j;
  j["half"] = to_string(c.half);
  j["mode"] = to_string(c.mode);
  j["sentences"] = c.outputs.size();
  j["bleu"] = c.bleu;
  if (c.natural_reference_bleu) j["natural_reference_bleu"] = *c.natural_reference_bleu;
  j["metrics"] = ordered_json::parse(metrics::to_json(c.metrics));
  return j;
}

ordered_json report_json(const GridReport& r) {
  ordered_json j;
  j["policy"] = r.policy;
  j["seed"] = r.seed;
  j["model_checksum"] = r.model_checksum;
  j["cells"] = ordered_json::array();
  for (const auto& c : r.cells) j["cells"].push_back(cell_json(c));
  j["combined_bleu"] = r.combined_bleu;
  j["combined_macro_bleu"] = r.combined_macro_bleu;
  j["tag_effect"] = r.tag_effect();
  return j;
}

}  // namespace

std::string GridReport::to_text() const {
  std::ostringstream out;
  char line[256];
  out << "policy " << policy << "  seed " << seed << "  model " << model_checksum << '\n';
  std::snprintf(line, sizeof line, "%-16s %-15s %8s %8s %8s %8s %8s\n", "test half", "mode", "BLEU", "natref",
                "TTR", "density", "lenvar");
  out << line;
  for (const auto& c : cells) {
    std::snprintf(line, sizeof line, "%-16s %-15s %8s %8s %8s %8s %8s\n", std::string(to_string(c.half)).c_str(),
                  std::string(to_string(c.mode)).c_str(), fixed(c.bleu).c_str(),
                  c.natural_reference_bleu ? fixed(*c.natural_reference_bleu).c_str() : "-",
                  fixed(c.metrics.lexical_variety, 4).c_str(), fixed(c.metrics.lexical_density, 4).c_str(),
                  fixed(c.metrics.length_variety, 4).c_str());
    out << line;
  }
  out << "combined matched BLEU " << fixed(combined_bleu) << " (macro " << fixed(combined_macro_bleu) << ")\n";
  return out.str();
}

std::string GridReport::to_json() const { return report_json(*this).dump(2) + "\n"; }

std::string PolicyComparison::to_text() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %22s %8s %8s %8s %8s %8s %9s\n", "policy", "total / tagged / frac", "SO-nt",
                "SO-tr", "TO-nt", "TO-tr", "matched", "tag-eff");
  out << line;
  for (const auto& r : runs) {
    const auto& g = r.report;
    std::snprintf(line, sizeof line, "%-28s %22s %8s %8s %8s %8s %8s %9s\n", r.policy.c_str(),
                  r.stats.format().c_str(), fixed(g.cell(Half::SourceOriginal, Mode::Natural).bleu).c_str(),
                  fixed(g.cell(Half::SourceOriginal, Mode::Translationese).bleu).c_str(),
                  fixed(g.cell(Half::TargetOriginal, Mode::Natural).bleu).c_str(),
                  fixed(g.cell(Half::TargetOriginal, Mode::Translationese).bleu).c_str(),
                  fixed(g.combined_bleu).c_str(), fixed(g.tag_effect(), 4).c_str());
    out << line;
  }
  return out.str();
}

std::string PolicyComparison::to_json() const {
  ordered_json j = ordered_json::array();
  for (const auto& r : runs) {
    ordered_json e;
    e["policy"] = r.policy;
    e["total"] = r.stats.total;
    e["tagged"] = r.stats.tagged;
    e["report"] = report_json(r.report);
    j.push_back(e);
  }
  return j.dump(2) + "\n";
}

PolicyComparison compare_policies(const toymt::QuadrantSpec& spec, const std::vector<tagging::TagPolicy>& policies,
                                  const toymt::ToyMtConfig& config, GridOptions options) {
  if (policies.size() < 2) throw Error("compare_policies: need at least two policies");
  const auto data = toymt::generate_quadrant_data(spec);
  const auto test = GridTestSet::from_quadrants(data);
  const auto training = data.training();
  PolicyComparison out;
  for (const auto& policy : policies) {
    auto tagged = tagging::apply_policy(training, policy);
    auto trained = toymt::train_toymt(tagged.corpus, data.dev, config);
    options.policy = tagging::describe(policy);
    options.seed = config.seed;
    out.runs.push_back({options.policy, tagged.stats, run_grid_eval(trained.model, test, options)});
  }
  return out;
}

// --- manifest ------------------------------------------------------------

FileRecord hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::uint64_t h = fnv1a64("");
  std::uint64_t bytes = 0;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const auto n = static_cast<std::size_t>(in.gcount());
    h = fnv1a64(std::string_view(buf, n), h);
    bytes += n;
  }
  return {path, hex64(h), bytes};
}

namespace {
ordered_json records_json(const std::vector<FileRecord>& records) {
  ordered_json a = ordered_json::array();
  for (const auto& r : records) a.push_back({{"path", r.path}, {"fnv1a64", r.hash}, {"bytes", r.bytes}});
  return a;
}

std::vector<FileRecord> records_from(const ordered_json& a) {
  std::vector<FileRecord> out;
  for (const auto& r : a) {
    out.push_back({r.at("path").get<std::string>(), r.at("fnv1a64").get<std::string>(), r.at("bytes").get<std::uint64_t>()});
  }
  return out;
}
}  // namespace

std::string RunManifest::to_json() const {
  ordered_json j;
  j["toolkit_version"] = toolkit_version;
  j["arguments"] = arguments;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = records_json(inputs);
  j["outputs"] = records_json(outputs);
  j["stats"] = ordered_json::object();
  for (const auto& [stage, kv] : stats) {
    for (const auto& [k, v] : kv) j["stats"][stage][k] = v;
  }
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    const auto j = ordered_json::parse(text);
    m.toolkit_version = j.at("toolkit_version").get<std::string>();
    m.arguments = j.at("arguments").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.at("config").get<std::string>();
    m.inputs = records_from(j.at("inputs"));
    m.outputs = records_from(j.at("outputs"));
    for (const auto& [stage, kv] : j.at("stats").items()) {
      for (const auto& [k, v] : kv.items()) m.stats[stage][k] = v.get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("run manifest: ") + e.what());
  }
  return m;
}

void RunManifest::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << to_json();
  if (!out) throw Error("failed writing '" + path + "'");
}

RunManifest RunManifest::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return from_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

}  // namespace tagmt::harness
