// Command-line front end: data checks, training, evaluation, noise
// sweeps, windowed-noise comparisons, adversarial attacks and report
// rendering.  Every run writes a reproducibility manifest holding the
// parsed configuration, the seeds, the source revision and the wall
// time.  Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "spikeadv/attack.hpp"
#include "spikeadv/dnn.hpp"
#include "spikeadv/experiments.hpp"
#include "spikeadv/idx.hpp"
#include "spikeadv/lif.hpp"
#include "spikeadv/model_io.hpp"
#include "spikeadv/noise.hpp"
#include "spikeadv/sdbn.hpp"

namespace {

using namespace spikeadv;
namespace fs = std::filesystem;
using nlohmann::json;

// Usage mistakes that only surface after flag parsing (exit code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_data_dir() {
  const char* env = std::getenv("SPIKEADV_DATA_DIR");
  return env && *env ? env : "data";
}

LabeledImageSet load01(const std::string& dir, LabeledImageSet::Split split) {
  return rescale(load_mnist_split(dir, split), 0.0f, 1.0f);
}

LabeledImageSet take_head(LabeledImageSet set, std::size_t count) {
  if (count > 0 && count < set.size()) {
    set.images.resize(count);
    set.labels.resize(count);
  }
  return set;
}

Window parse_window(const std::string& text) {
  std::istringstream in(text);
  Window w{};
  char c1 = 0, c2 = 0, c3 = 0;
  in >> w.row0 >> c1 >> w.col0 >> c2 >> w.height >> c3 >> w.width;
  if (!in || c1 != ',' || c2 != ',' || c3 != ',' || !(in >> std::ws).eof() ||
      !w.inside_grid())
    throw UsageError("bad window '" + text + "', expected row0,col0,height,width inside 28x28");
  return w;
}

std::vector<double> parse_magnitudes(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad magnitude '" + item + "' in '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty magnitude list");
  return out;
}

struct RunTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_run_manifest(const std::string& path, const std::string& command,
                        json config, json seeds, double wall_seconds) {
  json j;
  j["command"] = command;
  j["config"] = std::move(config);
  j["seeds"] = std::move(seeds);
  j["git_rev"] = SPIKEADV_GIT_REV;
  j["wall_time_seconds"] = wall_seconds;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write run manifest " + path);
  out << j.dump(2) << '\n';
}

std::string manifest_or_default(const std::string& manifest, const std::string& fallback) {
  return manifest.empty() ? fallback : manifest;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

// ---- trainers shared by sweep-style commands -------------------------------

struct DnnFlags {
  int epochs = 30;
  int minibatch = 100;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double lr_decay = 1.0;
  std::uint64_t seed = 1;

  DnnTrainConfig config() const {
    DnnTrainConfig cfg;
    cfg.epochs = epochs;
    cfg.minibatch = minibatch;
    cfg.learning_rate = learning_rate;
    cfg.momentum = momentum;
    cfg.lr_decay = lr_decay;
    cfg.seed = seed;
    return cfg;
  }
  json to_json() const {
    return {{"epochs", epochs},         {"minibatch", minibatch},
            {"learning_rate", learning_rate}, {"momentum", momentum},
            {"lr_decay", lr_decay},     {"seed", seed}};
  }
};

struct SdbnFlags {
  int hidden1 = 500;
  int hidden2 = 500;
  int rbm_epochs = 10;
  int top_epochs = 40;
  int minibatch = 100;
  double rbm_learning_rate = 0.1;
  double top_learning_rate = 0.05;
  std::uint64_t seed = 1;

  SdbnTrainConfig config() const {
    SdbnTrainConfig cfg;
    cfg.hidden1 = hidden1;
    cfg.hidden2 = hidden2;
    cfg.layer1.epochs = rbm_epochs;
    cfg.layer2.epochs = rbm_epochs;
    cfg.layer1.minibatch = minibatch;
    cfg.layer2.minibatch = minibatch;
    cfg.layer1.learning_rate = rbm_learning_rate;
    cfg.layer2.learning_rate = rbm_learning_rate;
    cfg.layer1.seed = seed;
    cfg.layer2.seed = seed + 1;
    cfg.top.epochs = top_epochs;
    cfg.top.minibatch = minibatch;
    cfg.top.learning_rate = top_learning_rate;
    cfg.top.seed = seed + 2;
    return cfg;
  }
  json to_json() const {
    return {{"hidden1", hidden1},
            {"hidden2", hidden2},
            {"rbm_epochs", rbm_epochs},
            {"top_epochs", top_epochs},
            {"minibatch", minibatch},
            {"rbm_learning_rate", rbm_learning_rate},
            {"top_learning_rate", top_learning_rate},
            {"seed", seed}};
  }
};

Trainer make_trainer(const std::string& network, const DnnFlags& dnn, const SdbnFlags& sdbn,
                     std::size_t subset, bool verbose) {
  std::ostream* log = verbose ? &std::cerr : nullptr;
  if (network == "dnn") {
    const DnnTrainConfig cfg = dnn.config();
    return [cfg, subset, log](const LabeledImageSet& train) -> Evaluator {
      const auto net = dnn_train(take_head(train, subset), cfg, log);
      return [net](const LabeledImageSet& probe) { return dnn_evaluate(net, probe); };
    };
  }
  SdbnTrainConfig cfg = sdbn.config();
  cfg.train_subset = subset;
  return [cfg, log](const LabeledImageSet& train) -> Evaluator {
    const auto model = sdbn_pretrain(train, cfg, log);
    return [model](const LabeledImageSet& probe) { return sdbn_evaluate(model, probe); };
  };
}

Oracle oracle_for(const ModelFile& mf, bool spiking, const SimConfig& sim) {
  if (mf.kind == "dnn") {
    if (spiking) throw UsageError("--spiking applies to sdbn models only");
    return dnn_oracle(dnn_from_model_file(mf));
  }
  const SdbnModel model = sdbn_from_model_file(mf);
  if (spiking) return sdbn_spiking_oracle(model, sim);
  return sdbn_oracle(model);
}

// ---- subcommand runners -----------------------------------------------------

int run_fetch_data(const std::string& data_dir, const std::string& manifest) {
  RunTimer timer;
  const MnistPaths paths = mnist_paths(data_dir);
  std::vector<std::string> missing;
  for (const auto& p :
       {paths.train_images, paths.train_labels, paths.test_images, paths.test_labels})
    if (!fs::exists(p)) missing.push_back(p);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "missing MNIST files:\n";
    for (const auto& p : missing) msg << "  " << p << '\n';
    msg << "place the four canonical idx files (train-images-idx3-ubyte, "
           "train-labels-idx1-ubyte, t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte) "
           "in the data directory or point --data-dir/SPIKEADV_DATA_DIR at them";
    throw std::runtime_error(msg.str());
  }
  const auto train = load_mnist_split(data_dir, LabeledImageSet::Split::train);
  const auto test = load_mnist_split(data_dir, LabeledImageSet::Split::test);
  std::cout << "train images: " << train.size() << "\n"
            << "test images:  " << test.size() << "\n"
            << "data dir:     " << data_dir << "\n";
  write_run_manifest(manifest_or_default(manifest, "fetch-data.run.json"), "fetch-data",
                     {{"data_dir", data_dir}}, json::object(), timer.seconds());
  return 0;
}

int run_train_dnn(const std::string& data_dir, const std::string& out, std::size_t subset,
                  const DnnFlags& flags, const std::string& manifest) {
  RunTimer timer;
  const auto train = take_head(load01(data_dir, LabeledImageSet::Split::train), subset);
  const auto test = load01(data_dir, LabeledImageSet::Split::test);
  const auto net = dnn_train(train, flags.config(), &std::cerr);
  const double acc = dnn_evaluate(net, test);

  json config = flags.to_json();
  config["data_dir"] = data_dir;
  config["subset"] = subset;
  config["test_accuracy"] = acc;
  save_model(net, out, config, {{"seed", flags.seed}});
  char line[64];
  std::snprintf(line, sizeof line, "test accuracy %.4f\n", acc);
  std::cout << line;
  write_run_manifest(manifest_or_default(manifest, out + ".run.json"), "train dnn", config,
                     {{"seed", flags.seed}}, timer.seconds());
  return 0;
}

int run_train_sdbn(const std::string& data_dir, const std::string& out, std::size_t subset,
                   const SdbnFlags& flags, const std::string& manifest) {
  RunTimer timer;
  SdbnTrainConfig cfg = flags.config();
  cfg.train_subset = subset;
  const auto train = load01(data_dir, LabeledImageSet::Split::train);
  const auto test = load01(data_dir, LabeledImageSet::Split::test);
  const auto model = sdbn_pretrain(train, cfg, &std::cerr);
  const double acc = sdbn_evaluate(model, test);

  json config = flags.to_json();
  config["data_dir"] = data_dir;
  config["subset"] = subset;
  config["test_accuracy"] = acc;
  const json seeds = {{"layer1", cfg.layer1.seed}, {"layer2", cfg.layer2.seed},
                      {"top", cfg.top.seed}};
  save_model(model, out, config, seeds);
  char line[64];
  std::snprintf(line, sizeof line, "test accuracy %.4f\n", acc);
  std::cout << line;
  write_run_manifest(manifest_or_default(manifest, out + ".run.json"), "train sdbn", config,
                     seeds, timer.seconds());
  return 0;
}

int run_eval(const std::string& data_dir, const std::string& model_path, bool spiking,
             const SimConfig& sim, std::size_t limit, const std::string& manifest) {
  RunTimer timer;
  const ModelFile mf = read_model_file(model_path);
  const auto test = take_head(load01(data_dir, LabeledImageSet::Split::test), limit);

  double acc = 0.0;
  if (mf.kind == "dnn") {
    if (spiking) throw UsageError("--spiking applies to sdbn models only");
    acc = dnn_evaluate(dnn_from_model_file(mf), test);
  } else {
    const SdbnModel model = sdbn_from_model_file(mf);
    if (spiking) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        SimConfig per = sim;
        per.seed = derive_seed(sim.seed, i);
        const auto fwd = sdbn_spike_forward(model, test.images[i], per);
        if (argmax(fwd.probabilities) == test.labels[i]) ++correct;
      }
      acc = static_cast<double>(correct) / static_cast<double>(test.size());
    } else {
      acc = sdbn_evaluate(model, test);
    }
  }
  char line[32];
  std::snprintf(line, sizeof line, "%.4f\n", acc);
  std::cout << line;
  const json config = {{"model", model_path}, {"data_dir", data_dir},
                       {"kind", mf.kind},     {"spiking", spiking},
                       {"limit", limit},      {"duration", sim.duration},
                       {"repeats", sim.repeats}};
  write_run_manifest(manifest_or_default(manifest, "eval.run.json"), "eval", config,
                     {{"sim_seed", sim.seed}}, timer.seconds());
  return 0;
}

int run_noise_sweep_cmd(const std::string& data_dir, const std::string& network,
                        const std::string& apply, const std::string& dist,
                        const std::string& magnitudes_text, const std::string& window_text,
                        std::uint64_t seed, std::size_t subset, std::size_t test_subset,
                        const DnnFlags& dnn, const SdbnFlags& sdbn, const std::string& out,
                        bool verbose, const std::string& manifest) {
  RunTimer timer;
  NoiseScenario sc;
  sc.apply = apply == "train-only" ? NoiseScenario::Apply::train_only
             : apply == "both"     ? NoiseScenario::Apply::both
                                   : NoiseScenario::Apply::test_only;
  sc.dist = dist == "uniform" ? NoiseSpec::Dist::uniform : NoiseSpec::Dist::normal;
  sc.magnitudes = parse_magnitudes(magnitudes_text);
  if (!window_text.empty()) sc.region = parse_window(window_text);
  sc.seed = seed;

  const auto train = load01(data_dir, LabeledImageSet::Split::train);
  const auto test = take_head(load01(data_dir, LabeledImageSet::Split::test), test_subset);
  const Trainer trainer = make_trainer(network, dnn, sdbn, subset, verbose);
  const AccuracyTable table = run_noise_sweep(trainer, train, test, sc);
  const std::string csv = accuracy_csv(table);
  write_text(out, csv);
  std::cout << "wrote " << out << " (" << table.magnitudes.size() << " magnitudes)\n";

  json config = {{"network", network},   {"apply", apply},
                 {"dist", dist},         {"magnitudes", sc.magnitudes},
                 {"window", window_text}, {"subset", subset},
                 {"test_subset", test_subset}, {"data_dir", data_dir},
                 {"out", out}};
  config["training"] = network == "dnn" ? dnn.to_json() : sdbn.to_json();
  write_run_manifest(manifest_or_default(manifest, out + ".run.json"), "noise-sweep", config,
                     {{"noise_seed", seed}}, timer.seconds());
  return 0;
}

int run_window_noise_cmd(const std::string& data_dir, const std::string& network,
                         const std::string& corner_text, const std::string& center_text,
                         const std::string& magnitudes_text, const std::string& dist,
                         std::uint64_t seed, std::size_t subset, std::size_t test_subset,
                         const DnnFlags& dnn, const SdbnFlags& sdbn, const std::string& out,
                         bool verbose, const std::string& manifest) {
  RunTimer timer;
  const Window corner = parse_window(corner_text);
  const Window center = parse_window(center_text);
  const auto magnitudes = parse_magnitudes(magnitudes_text);
  const auto d = dist == "uniform" ? NoiseSpec::Dist::uniform : NoiseSpec::Dist::normal;

  const auto train = load01(data_dir, LabeledImageSet::Split::train);
  const auto test = take_head(load01(data_dir, LabeledImageSet::Split::test), test_subset);
  const Trainer trainer = make_trainer(network, dnn, sdbn, subset, verbose);
  const AccuracyTable table =
      run_window_noise(trainer, train, test, corner, center, magnitudes, d, seed);
  write_text(out, accuracy_csv(table));
  std::cout << "wrote " << out << " (corner vs center, " << magnitudes.size()
            << " magnitudes)\n";

  json config = {{"network", network},   {"corner", corner_text},
                 {"center", center_text}, {"dist", dist},
                 {"magnitudes", magnitudes}, {"subset", subset},
                 {"test_subset", test_subset}, {"data_dir", data_dir},
                 {"out", out}};
  config["training"] = network == "dnn" ? dnn.to_json() : sdbn.to_json();
  write_run_manifest(manifest_or_default(manifest, out + ".run.json"), "window-noise", config,
                     {{"noise_seed", seed}}, timer.seconds());
  return 0;
}

int run_attack_cmd(const std::string& data_dir, const std::string& network,
                   const std::string& model_path, const std::string& window_text, int m,
                   double delta, double d_max, int target, int max_iterations, int index,
                   std::size_t samples, bool spiking, const SimConfig& sim,
                   const std::string& out, const std::string& adv_images,
                   const std::string& adv_labels, const std::string& trace_dir,
                   const std::string& manifest) {
  RunTimer timer;
  AttackConfig cfg;
  cfg.window = parse_window(window_text);
  cfg.m = m;
  cfg.delta = delta;
  cfg.d_max = d_max;
  cfg.max_iterations = max_iterations;
  if (samples == 0) {
    if (index < 0) throw UsageError("--index must be nonnegative");
    if (target < 0 || target >= kClasses)
      throw UsageError("--target must name a class in 0..9");
  }

  const ModelFile mf = read_model_file(model_path);
  if (!network.empty() && network != mf.kind)
    throw UsageError("--network " + network + " does not match model kind " + mf.kind);
  const Oracle oracle = oracle_for(mf, spiking, sim);
  const auto test = load01(data_dir, LabeledImageSet::Split::test);

  json config = {{"model", model_path}, {"kind", mf.kind},
                 {"window", window_text}, {"m", m},
                 {"delta", delta},      {"dmax", d_max},
                 {"max_iterations", max_iterations}, {"spiking", spiking},
                 {"data_dir", data_dir}};

  if (samples == 0) {
    if (static_cast<std::size_t>(index) >= test.size())
      throw UsageError("--index out of range for the test set");
    cfg.target = target;
    const auto [adv, trace] = generate_adversarial(oracle, test.images[index], cfg);
    std::ostringstream csv_out;
    attack_report(trace, csv_out);
    const std::string csv = csv_out.str();
    if (out.empty()) {
      std::cout << csv;
    } else {
      write_text(out, csv);
      std::cout << "wrote " << out << "\n";
    }
    std::cout << "status " << to_string(trace.status) << " after " << trace.iterations()
              << " iterations, distance "
              << (trace.records.empty() ? 0.0 : trace.records.back().distance_value) << "\n";
    if (!adv_images.empty() || !adv_labels.empty()) {
      if (adv_images.empty() || adv_labels.empty())
        throw UsageError("--adv-images and --adv-labels go together");
      LabeledImageSet one;
      one.split = LabeledImageSet::Split::test;
      one.images.push_back(adv);
      one.labels.push_back(test.labels[index]);
      save_idx(adv_images, adv_labels, one);
    }
    config["index"] = index;
    config["target"] = target;
    config["status"] = to_string(trace.status);
  } else {
    const auto picked = select_correctly_classified(oracle, test, samples);
    const auto entries = run_attack_campaign(oracle, test, picked, cfg);
    const json report = campaign_json(entries);
    if (out.empty()) {
      std::cout << report.dump(2) << "\n";
    } else {
      write_text(out, report.dump(2) + "\n");
      std::cout << "wrote " << out << "\n";
    }
    const CampaignSummary s = summarize_campaign(entries);
    std::cout << "attempted " << s.attempted << ", successes " << s.successes
              << ", success rate " << s.success_rate << "\n";
    if (!adv_images.empty() || !adv_labels.empty()) {
      if (adv_images.empty() || adv_labels.empty())
        throw UsageError("--adv-images and --adv-labels go together");
      save_idx(adv_images, adv_labels, adversarial_set(entries));
    }
    if (!trace_dir.empty()) {
      fs::create_directories(trace_dir);
      for (const auto& e : entries) {
        if (e.trace.records.empty()) continue;  // attack failed before the first probe
        std::ostringstream trace_out;
        attack_report(e.trace, trace_out);
        write_text(
            (fs::path(trace_dir) / ("trace_" + std::to_string(e.index) + ".csv")).string(),
            trace_out.str());
      }
    }
    config["samples"] = samples;
    config["success_rate"] = s.success_rate;
  }

  write_run_manifest(manifest_or_default(manifest, out.empty() ? "attack.run.json"
                                                                : out + ".run.json"),
                     "attack", config, {{"sim_seed", sim.seed}}, timer.seconds());
  return 0;
}

int run_report(const std::string& noise_csv, const std::string& campaign_path,
               const std::string& manifest) {
  RunTimer timer;
  if (noise_csv.empty() && campaign_path.empty())
    throw UsageError("report needs --noise CSV and/or --campaign JSON");

  if (!noise_csv.empty()) {
    std::ifstream in(noise_csv);
    if (!in) throw std::runtime_error("cannot read " + noise_csv);
    std::string line;
    if (!std::getline(in, line) || line != "magnitude,scenario,distribution,accuracy")
      throw std::runtime_error(noise_csv + ": unexpected header '" + line + "'");

    std::vector<std::string> columns;                      // "scenario/distribution"
    std::map<std::string, std::map<std::string, std::string>> grid;  // magnitude -> col -> acc
    std::vector<std::string> magnitude_order;
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string mag, scenario, dist, acc;
      if (!std::getline(row, mag, ',') || !std::getline(row, scenario, ',') ||
          !std::getline(row, dist, ',') || !std::getline(row, acc))
        throw std::runtime_error(noise_csv + ": malformed row '" + line + "'");
      const std::string col = scenario + "/" + dist;
      if (std::find(columns.begin(), columns.end(), col) == columns.end())
        columns.push_back(col);
      if (!grid.count(mag)) magnitude_order.push_back(mag);
      grid[mag][col] = acc;
    }

    std::cout << "accuracy [%] from " << noise_csv << "\n";
    std::cout << "magnitude";
    for (const auto& col : columns) std::cout << "  " << col;
    std::cout << "\n";
    for (const auto& mag : magnitude_order) {
      std::cout << mag;
      for (const auto& col : columns) {
        const auto it = grid[mag].find(col);
        if (it == grid[mag].end() || it->second == "nan") {
          std::cout << "  failed";
        } else {
          char cell[32];
          std::snprintf(cell, sizeof cell, "  %.2f", 100.0 * std::stod(it->second));
          std::cout << cell;
        }
      }
      std::cout << "\n";
    }
  }

  if (!campaign_path.empty()) {
    std::ifstream in(campaign_path);
    if (!in) throw std::runtime_error("cannot read " + campaign_path);
    json report;
    try {
      in >> report;
    } catch (const json::exception& e) {
      throw std::runtime_error(campaign_path + ": not valid JSON: " + e.what());
    }
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.2f",
                  100.0 * report.value("success_rate", 0.0));
    std::cout << "campaign " << campaign_path << ": attempted "
              << report.value("attempted", 0) << ", completed " << report.value("completed", 0)
              << ", successes " << report.value("successes", 0) << " (" << rate
              << "%), mean distance " << report.value("mean_final_distance", 0.0)
              << ", mean iterations " << report.value("mean_iterations", 0.0) << "\n";
  }

  write_run_manifest(manifest_or_default(manifest, "report.run.json"), "report",
                     {{"noise", noise_csv}, {"campaign", campaign_path}}, json::object(),
                     timer.seconds());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiking belief net and dense net robustness workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SPIKEADV_GIT_REV);

  std::string data_dir = default_data_dir();
  app.add_option("--data-dir", data_dir, "MNIST idx directory (env SPIKEADV_DATA_DIR)")
      ->capture_default_str();

  std::string manifest;
  app.add_option("--manifest", manifest, "run manifest path (default: derived from output)");

  int exit_code = 0;
  const auto run = [&exit_code](auto&& fn) {
    return [&exit_code, fn]() { exit_code = fn(); };
  };

  // fetch-data
  auto* fetch = app.add_subcommand("fetch-data", "verify the MNIST files are in place");
  fetch->callback(run([&] { return run_fetch_data(data_dir, manifest); }));

  // train dnn|sdbn
  auto* train = app.add_subcommand("train", "train a network and save its model file");
  train->require_subcommand(1);
  std::string train_out = "model.bin";
  std::size_t train_subset = 0;
  train->add_option("--out", train_out, "model file to write")->capture_default_str();
  train->add_option("--subset", train_subset, "train on the first N images only (0 = all)");

  DnnFlags dnn_flags;
  auto* train_dnn = train->add_subcommand("dnn", "dense baseline classifier");
  train_dnn->add_option("--epochs", dnn_flags.epochs)->capture_default_str();
  train_dnn->add_option("--minibatch", dnn_flags.minibatch)->capture_default_str();
  train_dnn->add_option("--lr", dnn_flags.learning_rate)->capture_default_str();
  train_dnn->add_option("--momentum", dnn_flags.momentum)->capture_default_str();
  train_dnn->add_option("--lr-decay", dnn_flags.lr_decay)->capture_default_str();
  train_dnn->add_option("--seed", dnn_flags.seed)->capture_default_str();
  train_dnn->callback(
      run([&] { return run_train_dnn(data_dir, train_out, train_subset, dnn_flags, manifest); }));

  SdbnFlags sdbn_flags;
  auto* train_sdbn = train->add_subcommand("sdbn", "stacked rate-unit belief net");
  train_sdbn->add_option("--hidden1", sdbn_flags.hidden1)->capture_default_str();
  train_sdbn->add_option("--hidden2", sdbn_flags.hidden2)->capture_default_str();
  train_sdbn->add_option("--rbm-epochs", sdbn_flags.rbm_epochs)->capture_default_str();
  train_sdbn->add_option("--top-epochs", sdbn_flags.top_epochs)->capture_default_str();
  train_sdbn->add_option("--minibatch", sdbn_flags.minibatch)->capture_default_str();
  train_sdbn->add_option("--rbm-lr", sdbn_flags.rbm_learning_rate)->capture_default_str();
  train_sdbn->add_option("--top-lr", sdbn_flags.top_learning_rate)->capture_default_str();
  train_sdbn->add_option("--seed", sdbn_flags.seed)->capture_default_str();
  train_sdbn->callback(run(
      [&] { return run_train_sdbn(data_dir, train_out, train_subset, sdbn_flags, manifest); }));

  // eval
  auto* eval = app.add_subcommand("eval", "print a saved model's test accuracy");
  std::string eval_model;
  bool eval_spiking = false;
  SimConfig eval_sim;
  std::size_t eval_limit = 0;
  eval->add_option("--model", eval_model, "model file")->required();
  eval->add_flag("--spiking", eval_spiking, "simulate spiking inference (sdbn only)");
  eval->add_option("--duration", eval_sim.duration, "simulated seconds per image")
      ->capture_default_str();
  eval->add_option("--repeats", eval_sim.repeats, "averaged runs per image")
      ->capture_default_str();
  eval->add_option("--sim-seed", eval_sim.seed)->capture_default_str();
  eval->add_option("--limit", eval_limit, "evaluate the first N test images only (0 = all)");
  eval->callback(run(
      [&] { return run_eval(data_dir, eval_model, eval_spiking, eval_sim, eval_limit, manifest); }));

  // shared training flags for the sweep commands
  const auto add_training_flags = [&](CLI::App* sub, DnnFlags& d, SdbnFlags& s) {
    sub->add_option("--epochs", d.epochs, "dnn epochs")->capture_default_str();
    sub->add_option("--lr", d.learning_rate, "dnn learning rate")->capture_default_str();
    sub->add_option("--seed-train", d.seed, "dnn training seed")->capture_default_str();
    sub->add_option("--rbm-epochs", s.rbm_epochs)->capture_default_str();
    sub->add_option("--top-epochs", s.top_epochs)->capture_default_str();
    sub->add_option("--hidden1", s.hidden1)->capture_default_str();
    sub->add_option("--hidden2", s.hidden2)->capture_default_str();
  };

  // noise-sweep
  auto* sweep = app.add_subcommand("noise-sweep", "accuracy vs noise magnitude");
  std::string sweep_network, sweep_apply = "test-only", sweep_dist = "normal";
  std::string sweep_magnitudes, sweep_window, sweep_out = "noise_sweep.csv";
  std::uint64_t sweep_seed = 0;
  std::size_t sweep_subset = 0, sweep_test_subset = 0;
  bool sweep_verbose = false;
  DnnFlags sweep_dnn;
  SdbnFlags sweep_sdbn;
  sweep->add_option("--network", sweep_network, "dnn or sdbn")
      ->required()
      ->check(CLI::IsMember({"dnn", "sdbn"}));
  sweep->add_option("--apply", sweep_apply, "noise placement")
      ->check(CLI::IsMember({"train-only", "test-only", "both"}))
      ->capture_default_str();
  sweep->add_option("--dist", sweep_dist)->check(CLI::IsMember({"normal", "uniform"}))
      ->capture_default_str();
  sweep->add_option("--magnitudes", sweep_magnitudes, "comma list, e.g. 0.02,0.05,0.1")
      ->required();
  sweep->add_option("--window", sweep_window, "optional region row0,col0,height,width");
  sweep->add_option("--seed", sweep_seed, "noise seed")->capture_default_str();
  sweep->add_option("--subset", sweep_subset, "training subset (0 = all)");
  sweep->add_option("--test-subset", sweep_test_subset, "test subset (0 = all)");
  sweep->add_flag("--verbose", sweep_verbose, "log training progress");
  sweep->add_option("--out", sweep_out, "csv to write")->capture_default_str();
  add_training_flags(sweep, sweep_dnn, sweep_sdbn);
  sweep->callback(run([&] {
    return run_noise_sweep_cmd(data_dir, sweep_network, sweep_apply, sweep_dist,
                               sweep_magnitudes, sweep_window, sweep_seed, sweep_subset,
                               sweep_test_subset, sweep_dnn, sweep_sdbn, sweep_out,
                               sweep_verbose, manifest);
  }));

  // window-noise
  auto* wnoise = app.add_subcommand("window-noise", "corner vs center 20-pixel noise");
  std::string wn_network, wn_corner = "0,0,5,4", wn_center = "10,14,5,4";
  std::string wn_magnitudes, wn_dist = "normal", wn_out = "window_noise.csv";
  std::uint64_t wn_seed = 0;
  std::size_t wn_subset = 0, wn_test_subset = 0;
  bool wn_verbose = false;
  DnnFlags wn_dnn;
  SdbnFlags wn_sdbn;
  wnoise->add_option("--network", wn_network, "dnn or sdbn")
      ->required()
      ->check(CLI::IsMember({"dnn", "sdbn"}));
  wnoise->add_option("--corner", wn_corner)->capture_default_str();
  wnoise->add_option("--center", wn_center)->capture_default_str();
  wnoise->add_option("--magnitudes", wn_magnitudes)->required();
  wnoise->add_option("--dist", wn_dist)->check(CLI::IsMember({"normal", "uniform"}))
      ->capture_default_str();
  wnoise->add_option("--seed", wn_seed)->capture_default_str();
  wnoise->add_option("--subset", wn_subset, "training subset (0 = all)");
  wnoise->add_option("--test-subset", wn_test_subset, "test subset (0 = all)");
  wnoise->add_flag("--verbose", wn_verbose);
  wnoise->add_option("--out", wn_out)->capture_default_str();
  add_training_flags(wnoise, wn_dnn, wn_sdbn);
  wnoise->callback(run([&] {
    return run_window_noise_cmd(data_dir, wn_network, wn_corner, wn_center, wn_magnitudes,
                                wn_dist, wn_seed, wn_subset, wn_test_subset, wn_dnn, wn_sdbn,
                                wn_out, wn_verbose, manifest);
  }));

  // attack
  auto* attack = app.add_subcommand("attack", "targeted black-box attack on a saved model");
  std::string atk_network, atk_model, atk_window = "11,11,5,5", atk_out;
  std::string atk_adv_images, atk_adv_labels, atk_trace_dir;
  int atk_m = 10, atk_target = -1, atk_max_iter = 1000, atk_index = 0;
  double atk_delta = 0.1, atk_dmax = 22.0;
  std::size_t atk_samples = 0;
  bool atk_spiking = false;
  SimConfig atk_sim;
  attack->add_option("--network", atk_network, "expected model kind (checked)")
      ->check(CLI::IsMember({"dnn", "sdbn"}));
  attack->add_option("--model", atk_model, "model file")->required();
  attack->add_option("--window", atk_window, "search window row0,col0,height,width")
      ->capture_default_str();
  attack->add_option("--m", atk_m, "pixels perturbed per iteration")->capture_default_str();
  attack->add_option("--delta", atk_delta, "per-pixel step")->capture_default_str();
  attack->add_option("--dmax", atk_dmax, "distance budget")->capture_default_str();
  attack->add_option("--target", atk_target, "target class (single attack)");
  attack->add_option("--max-iterations", atk_max_iter)->capture_default_str();
  attack->add_option("--index", atk_index, "test image index (single attack)")
      ->capture_default_str();
  attack->add_option("--samples", atk_samples,
                     "campaign over the first N correctly classified digits (0 = single)");
  attack->add_flag("--spiking", atk_spiking, "attack the spiking oracle (sdbn only)");
  attack->add_option("--duration", atk_sim.duration)->capture_default_str();
  attack->add_option("--repeats", atk_sim.repeats)->capture_default_str();
  attack->add_option("--sim-seed", atk_sim.seed)->capture_default_str();
  attack->add_option("--out", atk_out, "trace csv (single) or campaign json (default stdout)");
  attack->add_option("--adv-images", atk_adv_images, "idx file for adversarial images");
  attack->add_option("--adv-labels", atk_adv_labels, "idx file for their labels");
  attack->add_option("--trace-dir", atk_trace_dir, "directory for per-sample trace csvs");
  attack->callback(run([&] {
    return run_attack_cmd(data_dir, atk_network, atk_model, atk_window, atk_m, atk_delta,
                          atk_dmax, atk_target, atk_max_iter, atk_index, atk_samples,
                          atk_spiking, atk_sim, atk_out, atk_adv_images, atk_adv_labels,
                          atk_trace_dir, manifest);
  }));

  // report
  auto* report = app.add_subcommand("report", "render stored results as text");
  std::string rep_noise, rep_campaign;
  report->add_option("--noise", rep_noise, "noise sweep csv");
  report->add_option("--campaign", rep_campaign, "campaign json");
  report->callback(run([&] { return run_report(rep_noise, rep_campaign, manifest); }));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
