// dhgnet command-line front end: train, sweep, inspect, gen-synth, check-grad.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "dhgnet/experiment.hpp"

namespace fs = std::filesystem;
using dhgnet::ConfigError;
using nlohmann::json;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

/// Flags shared by train and sweep; each maps onto a config path.
struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> model;
  std::optional<std::string> output;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<double> noise_rate;
  std::optional<double> train_fraction;

  void attach(CLI::App* app) {
    app->add_option("config", config, "experiment config (JSON)")->required();
    app->add_option("--set", sets, "override any field, e.g. --set model.heads=4");
    app->add_option("--model", model, "dhgnet, gcn, gat, rgcn or no-dhgnet");
    app->add_option("-o,--output", output, "output directory");
    app->add_option("--seeds", seeds, "seeds to run");
    app->add_option("--epochs", epochs);
    app->add_option("--lr", lr);
    app->add_option("--batch-size", batch_size);
    app->add_option("--noise-rate", noise_rate);
    app->add_option("--train-fraction", train_fraction);
  }

  dhgnet::ExperimentConfig resolve() const {
    json j = dhgnet::read_json_file(config);
    if (model) j["model"]["kind"] = *model;
    if (output) j["output_dir"] = *output;
    if (!seeds.empty()) j["seeds"] = seeds;
    if (epochs) j["train"]["epochs"] = *epochs;
    if (lr) j["train"]["lr"] = *lr;
    if (batch_size) j["train"]["batch_size"] = *batch_size;
    if (noise_rate) j["graph"]["noise_rate"] = *noise_rate;
    if (train_fraction) j["train"]["train_fraction"] = *train_fraction;
    for (const auto& s : sets) dhgnet::apply_override(j, s);
    return dhgnet::config_from_json(j, fs::path(config).parent_path());
  }
};

int cmd_train(const CommonFlags& flags) {
  const auto cfg = flags.resolve();
  const auto data = dhgnet::load_data(cfg);
  const auto summary = dhgnet::run_experiment(cfg, data, fs::path(cfg.output_dir));
  for (const auto& r : summary.runs) {
    std::cout << "seed " << r.seed << ": accuracy " << dhgnet::format_metric(r.test.accuracy)
              << "  macro-F1 " << dhgnet::format_metric(r.test.macro_f1) << "  (best epoch "
              << r.best_epoch << ")\n";
  }
  std::cout << "mean: accuracy " << dhgnet::format_metric(summary.mean.accuracy) << "  macro-F1 "
            << dhgnet::format_metric(summary.mean.macro_f1) << "\n"
            << "wrote " << (fs::path(cfg.output_dir) / "summary.csv").string() << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& axis, const std::vector<std::string>& values) {
  const auto cfg = flags.resolve();
  const auto data = dhgnet::load_data(cfg);
  const auto rows = dhgnet::run_sweep(cfg, data, axis, values, fs::path(cfg.output_dir));
  for (const auto& r : rows) {
    if (r.seed != "mean") continue;
    std::cout << axis << "=" << r.value << " (" << r.model << "): accuracy "
              << dhgnet::format_metric(r.accuracy) << "  macro-F1 " << dhgnet::format_metric(r.macro_f1)
              << "\n";
  }
  std::cout << "wrote " << (fs::path(cfg.output_dir) / ("sweep_" + axis + ".csv")).string() << "\n";
  return 0;
}

int cmd_inspect(const std::string& run_dir, std::optional<std::uint64_t> seed, std::size_t top_k,
                const std::optional<std::string>& jsonl) {
  const json out = dhgnet::inspect_run(run_dir, seed, top_k);
  std::cout << out.dump(2) << "\n";
  if (jsonl) {
    std::ofstream os(*jsonl);
    for (const auto& w : out.at("words")) {
      for (const auto& n : w.at("neighbors")) {
        os << json{{"word", w.at("word")}, {"pair", n.at("pair")}, {"neighbor", n.at("neighbor")},
                   {"alpha", n.at("alpha")}}
                  .dump()
           << "\n";
      }
      for (const auto& [pair, a] : w.at("pair_weights").items()) {
        os << json{{"word", w.at("word")}, {"pair", pair}, {"language_alpha", a}}.dump() << "\n";
      }
    }
  }
  return 0;
}

int cmd_gen_synth(const std::optional<std::string>& config, const std::vector<std::string>& sets,
                  std::uint64_t seed, const std::string& out) {
  json j = config ? dhgnet::read_json_file(*config) : json(dhgnet::synth::SynthConfig{});
  for (const auto& s : sets) dhgnet::apply_override(j, s);
  dhgnet::synth::SynthConfig sc;
  try {
    sc = j.get<dhgnet::synth::SynthConfig>();
    dhgnet::synth::validate(sc);
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto task = dhgnet::synth::generate(sc, seed);
  dhgnet::synth::write_task(task, out);

  // A ready-to-run experiment over the written files.
  json exp;
  exp["target"] = sc.target;
  exp["sources"] = sc.sources;
  json data;
  for (const auto& s : sc.sources) data["embeddings"][s] = s + ".vec";
  data["dictionaries"] = json::array();
  for (const auto& d : task.dictionaries) {
    data["dictionaries"].push_back({{"src", d.src}, {"dst", d.dst}, {"path", "dict." + d.src + "-" + d.dst + ".tsv"}});
  }
  data["train"] = "train.tsv";
  data["valid"] = "valid.tsv";
  data["test"] = "test.tsv";
  exp["data"] = data;
  exp["output_dir"] = (fs::absolute(out) / "run").string();
  std::ofstream(fs::path(out) / "experiment.json") << exp.dump(2) << "\n";

  const auto loaded = dhgnet::synth::load_task(task);
  const double ceiling = dhgnet::synth::oracle_bound(task.oracle, sc.target, loaded.vocab, loaded.train,
                                                     loaded.test, loaded.num_classes);
  std::cout << "wrote synthetic task to " << out << " (oracle accuracy " << dhgnet::format_metric(ceiling)
            << ")\n";
  return 0;
}

int cmd_check_grad(std::uint64_t seed, double tolerance, std::size_t samples) {
  dhgnet::FdOptions fd;
  fd.tolerance = tolerance;
  fd.samples = samples;
  fd.seed = seed;
  const auto r = dhgnet::full_model_gradcheck(seed, fd);
  std::cout << "graph: " << r.nodes << " nodes, " << r.sources << " source languages, " << r.documents
            << " documents\n"
            << "checked " << r.report.coords.size() << " coordinates, max relative error "
            << r.report.max_error << " (tolerance " << tolerance << ")\n"
            << (r.report.pass ? "PASS" : "FAIL") << "\n";
  return r.report.pass ? 0 : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Tape buffers are freed and reallocated every step; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"DHGNet: dictionary-based heterogeneous graph embeddings for low-resource text classification"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "train one model per seed and write a run directory");
  train_flags.attach(train);

  CommonFlags sweep_flags;
  std::string axis;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "vary one axis and write a long-form CSV");
  sweep_flags.attach(sweep);
  sweep->add_option("--axis", axis, "train_size, noise_rate, source_language or gnn_kind")->required();
  sweep->add_option("--values", values, "axis values, e.g. 0.1 0.5 1.0 or sa sb sa+sb")->required();

  std::string run_dir;
  std::optional<std::uint64_t> inspect_seed;
  std::size_t top_k = 5;
  std::optional<std::string> jsonl;
  auto* inspect = app.add_subcommand("inspect", "graph statistics and attention of a trained run");
  inspect->add_option("run_dir", run_dir)->required();
  inspect->add_option("--seed", inspect_seed, "seed to inspect (default: first)");
  inspect->add_option("--top-k", top_k, "neighbors listed per word (0 = all)");
  inspect->add_option("--jsonl", jsonl, "also write attention records as JSON lines");

  std::optional<std::string> synth_config;
  std::vector<std::string> synth_sets;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  auto* gen = app.add_subcommand("gen-synth", "write a synthetic task in the input file formats");
  gen->add_option("--config", synth_config, "synthetic task config (JSON)");
  gen->add_option("--set", synth_sets, "override a field, e.g. --set p_err=0.1");
  gen->add_option("--seed", synth_seed);
  gen->add_option("-o,--output", synth_out)->required();

  std::uint64_t grad_seed = 1;
  double grad_tol = 1e-4;
  std::size_t grad_samples = 100;
  auto* grad = app.add_subcommand("check-grad", "finite-difference check of the full model gradient");
  grad->add_option("--seed", grad_seed);
  grad->add_option("--tolerance", grad_tol);
  grad->add_option("--samples", grad_samples);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsageError;
  }

  try {
    if (*train) return cmd_train(train_flags);
    if (*sweep) return cmd_sweep(sweep_flags, axis, values);
    if (*inspect) return cmd_inspect(run_dir, inspect_seed, top_k, jsonl);
    if (*gen) return cmd_gen_synth(synth_config, synth_sets, synth_seed, synth_out);
    if (*grad) return cmd_check_grad(grad_seed, grad_tol, grad_samples);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const dhgnet::TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
