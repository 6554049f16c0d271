#pragma once

// Declarative experiments: a JSON config resolves to data, a graph, a model
// and a training schedule; one run per seed, summaries averaged over seeds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhgnet/align.hpp"
#include "dhgnet/attention.hpp"
#include "dhgnet/checkpoint.hpp"
#include "dhgnet/classifier.hpp"
#include "dhgnet/gradcheck.hpp"
#include "dhgnet/graph.hpp"
#include "dhgnet/ingest.hpp"
#include "dhgnet/model.hpp"
#include "dhgnet/synth.hpp"

namespace dhgnet {

namespace fs = std::filesystem;
using nlohmann::json;

/// Bad or inconsistent configuration (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

struct DictionaryFile {
  std::string src;
  std::string dst;
  std::string path;
};

struct DataFiles {
  std::map<std::string, std::string> embeddings;  // source language -> path
  std::vector<DictionaryFile> dictionaries;
  std::string train;
  std::string valid;
  std::string test;
};

struct ContrastiveConfig {
  bool enabled = false;
  double margin = 0.5;
  std::size_t negatives = 5;
  std::size_t steps = 100;
  double lr = 1e-2;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t epochs = 30;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Fraction of training documents kept (stratified by class, per seed).
  double train_fraction = 1.0;
  ContrastiveConfig contrastive;
};

struct GraphConfig {
  std::size_t common_word_limit = 30000;
  double noise_rate = 0.0;
  /// 0 reuses the run seed.
  std::uint64_t noise_seed = 0;
};

struct ExperimentConfig {
  std::string target;
  /// Source languages used by the run; empty means every language in the data.
  std::vector<std::string> sources;
  std::optional<synth::SynthConfig> synth;
  std::uint64_t synth_seed = 1;
  std::optional<DataFiles> files;
  ModelKind model = ModelKind::kDhgnet;
  HyperParams hyper;
  std::size_t hidden = 32;
  TrainConfig train;
  GraphConfig graph;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs/default";
};

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["target"] = c.target;
  j["sources"] = c.sources;
  if (c.synth) {
    j["data"] = {{"synth", *c.synth}, {"synth_seed", c.synth_seed}};
  } else if (c.files) {
    json d;
    d["embeddings"] = c.files->embeddings;
    d["dictionaries"] = json::array();
    for (const auto& f : c.files->dictionaries)
      d["dictionaries"].push_back({{"src", f.src}, {"dst", f.dst}, {"path", f.path}});
    d["train"] = c.files->train;
    d["valid"] = c.files->valid;
    d["test"] = c.files->test;
    j["data"] = d;
  }
  j["model"] = {{"kind", model_kind_name(c.model)},
                {"d", c.hyper.d},
                {"heads", c.hyper.heads},
                {"d_out", c.hyper.d_out},
                {"layers", c.hyper.layers},
                {"leaky_slope", c.hyper.leaky_slope},
                {"layer_norm_eps", c.hyper.layer_norm_eps},
                {"self_pair_participates", c.hyper.self_pair_participates},
                {"dropout", c.hyper.dropout},
                {"hidden", c.hidden}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"lr", c.train.lr},
                {"epochs", c.train.epochs},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"eps", c.train.eps},
                {"train_fraction", c.train.train_fraction},
                {"contrastive",
                 {{"enabled", c.train.contrastive.enabled},
                  {"margin", c.train.contrastive.margin},
                  {"negatives", c.train.contrastive.negatives},
                  {"steps", c.train.contrastive.steps},
                  {"lr", c.train.contrastive.lr}}}};
  j["graph"] = {{"common_word_limit", c.graph.common_word_limit},
                {"noise_rate", c.graph.noise_rate},
                {"noise_seed", c.graph.noise_seed}};
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j;
}

namespace detail {

inline void reject_unknown(const json& j, const json& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
    const json& ref = known.at(key);
    if (ref.is_object() && !ref.empty() && value.is_object() && key != "words_per_language") {
      reject_unknown(value, ref, where + key + ".");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::string resolve_path(const std::string& p, const fs::path& base) {
  if (p.empty()) return p;
  fs::path path(p);
  return fs::absolute(path.is_absolute() ? path : base / path).lexically_normal().string();
}

}  // namespace detail

/// Typed config from JSON. Relative data paths resolve against `base_dir`.
inline ExperimentConfig config_from_json(const json& j, const fs::path& base_dir = ".") {
  ExperimentConfig c;
  try {
    json known = config_to_json(c);
    known["data"] = {{"synth", synth::SynthConfig{}},
                     {"synth_seed", 0},
                     {"embeddings", json::object()},
                     {"dictionaries", json::array()},
                     {"train", ""},
                     {"valid", ""},
                     {"test", ""}};
    detail::reject_unknown(j, known, "");

    detail::read(j, "target", c.target);
    detail::read(j, "sources", c.sources);
    if (!j.contains("data")) throw ConfigError("config needs a 'data' section");
    const json& d = j.at("data");
    const bool has_synth = d.contains("synth");
    const bool has_files = d.contains("train") || d.contains("embeddings") || d.contains("dictionaries");
    if (has_synth == has_files) throw ConfigError("data must hold either 'synth' or file paths");
    if (has_synth) {
      c.synth = d.at("synth").get<synth::SynthConfig>();
      detail::read(d, "synth_seed", c.synth_seed);
      if (c.target.empty()) c.target = c.synth->target;
      if (c.target != c.synth->target) throw ConfigError("target differs from the synthetic target");
    } else {
      DataFiles f;
      std::map<std::string, std::string> emb;
      detail::read(d, "embeddings", emb);
      for (auto& [lang, path] : emb) f.embeddings[lang] = detail::resolve_path(path, base_dir);
      if (d.contains("dictionaries")) {
        for (const auto& e : d.at("dictionaries")) {
          f.dictionaries.push_back({e.at("src").get<std::string>(), e.at("dst").get<std::string>(),
                                    detail::resolve_path(e.at("path").get<std::string>(), base_dir)});
        }
      }
      for (auto [key, out] : {std::pair{"train", &f.train}, {"valid", &f.valid}, {"test", &f.test}}) {
        if (!d.contains(key)) throw ConfigError(std::string("data needs a '") + key + "' path");
        *out = detail::resolve_path(d.at(key).get<std::string>(), base_dir);
      }
      c.files = std::move(f);
    }

    if (j.contains("model")) {
      const json& m = j.at("model");
      if (m.contains("kind")) {
        try {
          c.model = parse_model_kind(m.at("kind").get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
      detail::read(m, "d", c.hyper.d);
      detail::read(m, "heads", c.hyper.heads);
      detail::read(m, "d_out", c.hyper.d_out);
      detail::read(m, "layers", c.hyper.layers);
      detail::read(m, "leaky_slope", c.hyper.leaky_slope);
      detail::read(m, "layer_norm_eps", c.hyper.layer_norm_eps);
      detail::read(m, "self_pair_participates", c.hyper.self_pair_participates);
      detail::read(m, "dropout", c.hyper.dropout);
      detail::read(m, "hidden", c.hidden);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      detail::read(t, "batch_size", c.train.batch_size);
      detail::read(t, "lr", c.train.lr);
      detail::read(t, "epochs", c.train.epochs);
      detail::read(t, "beta1", c.train.beta1);
      detail::read(t, "beta2", c.train.beta2);
      detail::read(t, "eps", c.train.eps);
      detail::read(t, "train_fraction", c.train.train_fraction);
      if (t.contains("contrastive")) {
        const json& k = t.at("contrastive");
        detail::read(k, "enabled", c.train.contrastive.enabled);
        detail::read(k, "margin", c.train.contrastive.margin);
        detail::read(k, "negatives", c.train.contrastive.negatives);
        detail::read(k, "steps", c.train.contrastive.steps);
        detail::read(k, "lr", c.train.contrastive.lr);
      }
    }
    if (j.contains("graph")) {
      const json& g = j.at("graph");
      detail::read(g, "common_word_limit", c.graph.common_word_limit);
      detail::read(g, "noise_rate", c.graph.noise_rate);
      detail::read(g, "noise_seed", c.graph.noise_seed);
    }
    detail::read(j, "seeds", c.seeds);
    detail::read(j, "output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (c.target.empty()) throw ConfigError("exactly one target language is required");
  if (c.seeds.empty()) throw ConfigError("seeds list must not be empty");
  if (std::find(c.sources.begin(), c.sources.end(), c.target) != c.sources.end()) {
    throw ConfigError("target language listed as a source");
  }
  if (std::set<std::string>(c.sources.begin(), c.sources.end()).size() != c.sources.size()) {
    throw ConfigError("duplicate source language");
  }
  if (!(c.train.train_fraction > 0.0 && c.train.train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1]");
  }
  if (!(c.graph.noise_rate >= 0.0 && c.graph.noise_rate <= 1.0)) {
    throw ConfigError("noise_rate must lie in [0, 1]");
  }
  if (c.train.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.train.lr >= 0.0)) throw ConfigError("lr must be non-negative");
  try {
    c.hyper.validate();
    if (c.synth) synth::validate(*c.synth);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
/// possible and kept as a string otherwise.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("empty key in override '" + path + "'");
    if (!node->is_object()) throw ConfigError("override path '" + path + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

inline json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return j;
}

// ---------------------------------------------------------------------------
// Data and pipeline
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

/// Parsed task data plus, for synthetic data, the generated task.
struct TaskData {
  synth::LoadedTask task;
  std::optional<synth::SynthTask> generated;
};

inline TaskData load_data(const ExperimentConfig& c) {
  TaskData out;
  if (c.synth) {
    out.generated = synth::generate(*c.synth, c.synth_seed);
    out.task = synth::load_task(*out.generated);
    return out;
  }
  const DataFiles& f = *c.files;
  synth::LoadedTask& t = out.task;
  t.target = LanguageId(c.target);
  auto corpus = [&](const std::string& path, Split split) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return parse_corpus(is, t.vocab, t.target, split);
  };
  t.train = corpus(f.train, Split::kTrain);
  t.valid = corpus(f.valid, Split::kValid);
  t.test = corpus(f.test, Split::kTest);
  synth::finish_corpus(t);
  for (const auto& [lang, path] : f.embeddings) {
    t.sources.emplace_back(lang);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    t.tables.push_back(parse_embeddings(is, LanguageId(lang)));
  }
  for (const auto& d : f.dictionaries) {
    std::ifstream is(d.path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + d.path);
    t.dictionaries.push_back(parse_dictionary(is, LanguageId(d.src), LanguageId(d.dst)));
  }
  return out;
}

/// Stratified subsample keeping round(fraction * n_k) documents of every class
/// (at least one), in original order.
inline LabeledCorpus subsample(const LabeledCorpus& c, double fraction, std::uint64_t seed) {
  if (fraction >= 1.0) return c;
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < c.documents.size(); ++i) by_class[c.documents[i].label].push_back(i);
  auto rng = stream_rng(seed, 8);
  std::vector<std::size_t> keep;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size()))));
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(n, idx.size())));
  }
  std::sort(keep.begin(), keep.end());
  LabeledCorpus out;
  out.split = c.split;
  out.num_classes = c.num_classes;
  for (std::size_t i : keep) out.documents.push_back(c.documents[i]);
  return out;
}

/// Everything one seed's run needs. Not copyable: inputs point into graph.
struct Pipeline {
  std::vector<LanguageId> sources;
  std::vector<EmbeddingTable> tables;
  std::vector<BilingualDictionary> dictionaries;
  std::unique_ptr<DHG> graph;
  std::unique_ptr<GraphInputs> inputs;
  LabeledCorpus train;
  const LabeledCorpus* valid = nullptr;
  const LabeledCorpus* test = nullptr;
  Model model;
};

inline std::unique_ptr<Pipeline> build_pipeline(const ExperimentConfig& c, const TaskData& data,
                                                std::uint64_t seed) {
  auto p = std::make_unique<Pipeline>();
  const synth::LoadedTask& t = data.task;
  if (c.sources.empty()) {
    p->sources = t.sources;
  } else {
    for (const auto& s : c.sources) {
      LanguageId id(s);
      if (std::find(t.sources.begin(), t.sources.end(), id) == t.sources.end()) {
        throw ConfigError("source language " + s + " has no embedding table in the data");
      }
      p->sources.push_back(id);
    }
  }
  std::set<LanguageId> active(p->sources.begin(), p->sources.end());
  for (const auto& table : t.tables)
    if (active.contains(table.language)) p->tables.push_back(table);
  std::vector<BilingualDictionary> dicts;
  for (const auto& d : t.dictionaries) {
    const bool src_ok = d.src == t.target || active.contains(d.src);
    const bool dst_ok = d.dst == t.target || active.contains(d.dst);
    if (src_ok && dst_ok) dicts.push_back(d);
  }
  dicts = restrict_to_embeddings(dicts, p->tables);
  if (c.graph.noise_rate > 0.0) {
    dicts = inject_noise(std::move(dicts), c.graph.noise_rate,
                         c.graph.noise_seed != 0 ? c.graph.noise_seed : seed);
  }
  p->dictionaries = std::move(dicts);
  p->graph = std::make_unique<DHG>(
      build_dhg(t.vocab, t.target, p->sources, p->dictionaries, c.graph.common_word_limit));
  p->inputs = std::make_unique<GraphInputs>(prepare_inputs(*p->graph, p->tables));
  p->train = subsample(t.train, c.train.train_fraction, seed);
  p->valid = &t.valid;
  p->test = &t.test;
  p->model.kind = c.model;
  p->model.hyper = c.hyper;
  p->model.hidden = c.hidden;
  p->model.num_classes = t.num_classes;
  p->model.inputs = p->inputs.get();
  return p;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunResult {
  std::uint64_t seed = 0;
  Metrics test;
  Metrics valid;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  ParamStore params;
};

inline TrainOptions train_options(const ExperimentConfig& c, std::uint64_t seed) {
  TrainOptions o;
  o.batch_size = c.train.batch_size;
  o.epochs = c.train.epochs;
  o.adam.lr = c.train.lr;
  o.adam.beta1 = c.train.beta1;
  o.adam.beta2 = c.train.beta2;
  o.adam.eps = c.train.eps;
  o.seed = seed;
  return o;
}

inline RunResult run_seed(const ExperimentConfig& c, const Pipeline& p, std::uint64_t seed) {
  ParamStore init = init_params(p.model, seed);
  if (c.train.contrastive.enabled && p.model.effective_kind() != ModelKind::kNoDhgnet) {
    ContrastiveOptions co;
    co.margin = c.train.contrastive.margin;
    co.negatives = c.train.contrastive.negatives;
    co.steps = c.train.contrastive.steps;
    co.adam.lr = c.train.contrastive.lr;
    co.seed = seed;
    contrastive_align(*p.inputs, init, co);
  }
  TrainingState st = train(p.model, std::move(init), p.train, *p.valid, train_options(c, seed));
  RunResult r;
  r.seed = seed;
  const Tensor emb = target_embeddings(p.model, st.params);
  r.test = evaluate_with(st.params, emb, *p.test, p.model.num_classes).metrics;
  r.valid = evaluate_with(st.params, emb, *p.valid, p.model.num_classes).metrics;
  r.best_epoch = st.best_epoch;
  r.history = std::move(st.history);
  r.params = std::move(st.params);
  return r;
}

inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline json epoch_json(const EpochRecord& r) {
  return {{"epoch", r.epoch}, {"split", r.split}, {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1},
          {"loss", r.loss}};
}

struct ExperimentSummary {
  std::vector<RunResult> runs;
  Metrics mean;
};

inline Metrics mean_metrics(const std::vector<RunResult>& runs) {
  Metrics m;
  for (const auto& r : runs) {
    m.accuracy += r.test.accuracy;
    m.macro_f1 += r.test.macro_f1;
  }
  m.accuracy /= static_cast<double>(runs.size());
  m.macro_f1 /= static_cast<double>(runs.size());
  return m;
}

/// Runs every seed. When `out_dir` is set, writes config.json, summary.csv and
/// per seed metrics.jsonl plus checkpoint.bin.
inline ExperimentSummary run_experiment(const ExperimentConfig& c, const TaskData& data,
                                        const std::optional<fs::path>& out_dir) {
  ExperimentSummary s;
  if (out_dir) {
    fs::create_directories(*out_dir);
    std::ofstream(*out_dir / "config.json") << config_to_json(c).dump(2) << '\n';
  }
  for (std::uint64_t seed : c.seeds) {
    auto p = build_pipeline(c, data, seed);
    RunResult r = run_seed(c, *p, seed);
    if (out_dir) {
      const fs::path dir = *out_dir / ("seed_" + std::to_string(seed));
      fs::create_directories(dir);
      std::ofstream m(dir / "metrics.jsonl");
      for (const auto& e : r.history) m << epoch_json(e).dump() << '\n';
      m << json{{"epoch", r.best_epoch}, {"split", "test"}, {"accuracy", r.test.accuracy},
                {"macro_f1", r.test.macro_f1}}
               .dump()
        << '\n';
      save_checkpoint((dir / "checkpoint.bin").string(), r.params);
    }
    s.runs.push_back(std::move(r));
  }
  s.mean = mean_metrics(s.runs);
  if (out_dir) {
    std::ofstream csv(*out_dir / "summary.csv");
    csv << "seed,model,accuracy,macro_f1\n";
    for (const auto& r : s.runs) {
      csv << r.seed << ',' << model_kind_name(c.model) << ',' << format_metric(r.test.accuracy) << ','
          << format_metric(r.test.macro_f1) << '\n';
    }
    csv << "mean," << model_kind_name(c.model) << ',' << format_metric(s.mean.accuracy) << ','
        << format_metric(s.mean.macro_f1) << '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepAxis { kTrainSize, kNoiseRate, kSourceLanguage, kGnnKind };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "train_size") return SweepAxis::kTrainSize;
  if (s == "noise_rate") return SweepAxis::kNoiseRate;
  if (s == "source_language") return SweepAxis::kSourceLanguage;
  if (s == "gnn_kind") return SweepAxis::kGnnKind;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

inline double parse_fraction(const std::string& v) {
  std::string s = v;
  double scale = 1.0;
  if (!s.empty() && s.back() == '%') {
    s.pop_back();
    scale = 0.01;
  }
  auto d = dhgnet::detail::parse_double(s);
  if (!d) throw ConfigError("'" + v + "' is not a number");
  return *d * scale;
}

/// Copy of `base` with one axis set to `value`.
inline ExperimentConfig with_axis(const ExperimentConfig& base, SweepAxis axis, const std::string& value) {
  json j = config_to_json(base);
  switch (axis) {
    case SweepAxis::kTrainSize: j["train"]["train_fraction"] = parse_fraction(value); break;
    case SweepAxis::kNoiseRate: j["graph"]["noise_rate"] = parse_fraction(value); break;
    case SweepAxis::kGnnKind: j["model"]["kind"] = value; break;
    case SweepAxis::kSourceLanguage: {
      std::vector<std::string> langs;
      std::stringstream ss(value);
      for (std::string l; std::getline(ss, l, '+');) {
        if (l.empty()) throw ConfigError("empty language in '" + value + "'");
        langs.push_back(l);
      }
      j["sources"] = langs;
      break;
    }
  }
  return config_from_json(j);
}

struct SweepRow {
  std::string value;
  std::string seed;  // seed number or "mean"
  std::string model;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// One row per (value, seed) and one mean row per value. When `out_dir` is
/// set, each value's run lands in <out_dir>/<axis>=<value>/ and the table in
/// <out_dir>/sweep_<axis>.csv.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const TaskData& data,
                                       const std::string& axis_name,
                                       const std::vector<std::string>& values,
                                       const std::optional<fs::path>& out_dir) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const SweepAxis axis = parse_axis(axis_name);
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) configs.push_back(with_axis(base, axis, v));
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::optional<fs::path> dir;
    if (out_dir) dir = *out_dir / (axis_name + "=" + values[i]);
    const auto s = run_experiment(configs[i], data, dir);
    const std::string model = model_kind_name(configs[i].model);
    for (const auto& r : s.runs) {
      rows.push_back({values[i], std::to_string(r.seed), model, r.test.accuracy, r.test.macro_f1});
    }
    rows.push_back({values[i], "mean", model, s.mean.accuracy, s.mean.macro_f1});
  }
  if (out_dir) {
    std::ofstream csv(*out_dir / ("sweep_" + axis_name + ".csv"));
    csv << "axis,value,seed,model,accuracy,macro_f1\n";
    for (const auto& r : rows) {
      csv << axis_name << ',' << r.value << ',' << r.seed << ',' << r.model << ','
          << format_metric(r.accuracy) << ',' << format_metric(r.macro_f1) << '\n';
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Inspection
// ---------------------------------------------------------------------------

inline json stats_json(const GraphStats& s) {
  return {{"edges_per_pair", s.edges_per_pair},
          {"nodes_per_language", s.nodes_per_language},
          {"total_edges", s.total_edges},
          {"coverage", s.coverage}};
}

/// Graph statistics and last-layer attention of a trained run directory.
inline json inspect_run(const fs::path& run_dir, std::optional<std::uint64_t> seed, std::size_t top_k) {
  const fs::path cfg_path = run_dir / "config.json";
  if (!fs::exists(cfg_path)) throw std::runtime_error("no config.json in " + run_dir.string());
  const ExperimentConfig c = config_from_json(read_json_file(cfg_path), run_dir);
  const std::uint64_t s = seed.value_or(c.seeds.front());
  const fs::path ckpt = run_dir / ("seed_" + std::to_string(s)) / "checkpoint.bin";
  if (!fs::exists(ckpt)) throw std::runtime_error("no checkpoint at " + ckpt.string());

  const TaskData data = load_data(c);
  auto p = build_pipeline(c, data, s);
  ParamStore params = load_checkpoint(ckpt.string());
  const ParamStore expected = init_params(p->model, s);
  for (const auto& [name, t] : expected) {
    auto it = params.find(name);
    if (it == params.end() || !it->second.same_shape(t)) {
      throw CheckpointError("checkpoint does not match the configured model (" + name + ")");
    }
  }

  json out;
  out["run_dir"] = run_dir.string();
  out["seed"] = s;
  out["model"] = model_kind_name(c.model);
  out["graph"] = stats_json(graph_stats(*p->graph));
  const auto report = attention_report(p->model, params, top_k);
  out["pair_weights"] = mean_pair_weights(report);
  json words = json::array();
  for (const auto& wa : report) {
    json n = json::array();
    for (const auto& nb : wa.neighbors) n.push_back({{"pair", nb.pair}, {"neighbor", nb.neighbor}, {"alpha", nb.alpha}});
    words.push_back({{"word", wa.word}, {"neighbors", n}, {"pair_weights", wa.pair_weights}});
  }
  out["words"] = words;
  return out;
}

// ---------------------------------------------------------------------------
// Full-model gradient gate
// ---------------------------------------------------------------------------

struct GradGateResult {
  FdReport report;
  std::size_t nodes = 0;
  std::size_t sources = 0;
  std::size_t documents = 0;
};

/// Synthetic task small enough for the finite-difference gate.
inline synth::SynthConfig gradcheck_task_config() {
  synth::SynthConfig s;
  s.sources = {"sa", "sb"};
  s.num_concepts = 5;
  s.num_classes = 2;
  s.concept_dim = 3;
  s.default_words = 8;
  s.neutral_concepts = 1;
  s.train_docs = 10;
  s.valid_docs = 2;
  s.test_docs = 2;
  s.min_doc_len = 2;
  s.max_doc_len = 4;
  s.p_dict = 0.7;
  return s;
}

/// Classifier-over-DHGNet loss gradient against central differences on a
/// two-source graph of at most 30 nodes (2 layers, 2 heads).
inline GradGateResult full_model_gradcheck(std::uint64_t seed, const FdOptions& fd = {}) {
  const synth::SynthTask task = synth::generate(gradcheck_task_config(), seed);
  const synth::LoadedTask t = synth::load_task(task);
  const DHG g = build_dhg(t.vocab, t.target, t.sources, restrict_to_embeddings(t.dictionaries, t.tables), 0);
  const GraphInputs in = prepare_inputs(g, t.tables);
  Model m;
  m.kind = ModelKind::kDhgnet;
  m.hyper.d = 4;
  m.hyper.heads = 2;
  m.hyper.d_out = 2;
  m.hyper.layers = 2;
  m.hidden = 3;
  m.num_classes = t.num_classes;
  m.inputs = &in;
  ParamStore params = init_params(m, seed);
  // Non-trivial affine parameters so their gradients are exercised too.
  std::mt19937_64 rng(seed + 17);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  for (auto& [name, tensor] : params) {
    if (name.find(".norm.") != std::string::npos || name.rfind("clf.b", 0) == 0) {
      for (double& v : tensor.values()) v += jitter(rng);
    }
  }
  std::vector<const Document*> docs;
  std::vector<std::size_t> labels;
  for (const auto& d : t.train.documents) {
    docs.push_back(&d);
    labels.push_back(d.label);
  }
  Objective f = [&](Tape& tape, const ParamStore& ps) {
    Var emb = model_forward(tape, ps, m.kind, m.hyper, in);
    return nll_loss(log_softmax(classifier_logits(tape, ps, emb, docs)), labels);
  };
  GradGateResult r;
  r.report = fd_check(f, params, fd);
  r.nodes = g.num_nodes();
  r.sources = g.sources().size();
  r.documents = docs.size();
  return r;
}

}  // namespace dhgnet
