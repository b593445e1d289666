// Acceptance gates.  One criterion per process: the binary takes a case
// name, prints exactly one PASS/FAIL line on stdout and exits 0/1.
// Heavyweight trained models are built once by the setup-* cases and
// cached in SPIKEADV_WORK_DIR for the criteria that need them.
//
// Every tolerance is pinned here as a named constant next to the check
// that uses it.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lif_oracle.hpp"
#include "spikeadv/attack.hpp"
#include "spikeadv/dnn.hpp"
#include "spikeadv/experiments.hpp"
#include "spikeadv/idx.hpp"
#include "spikeadv/lif.hpp"
#include "spikeadv/model_io.hpp"
#include "spikeadv/noise.hpp"
#include "spikeadv/rbm.hpp"
#include "spikeadv/sdbn.hpp"
#include "spikeadv/siegert.hpp"

using namespace spikeadv;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances ------------------------------------------------------

constexpr double kOracleTolerance = 1e-9;        // c1: formula agreement
constexpr double kOracleBudgetSeconds = 1.0;     // c1: runtime bound
constexpr double kSiegertRelativeError = 0.10;   // c2: vs Monte-Carlo
constexpr int kSiegertInstances = 100;           // c2
constexpr double kSiegertSimSeconds = 10.0;      // c2
constexpr int kSiegertTrials = 100;              // c2
constexpr double kDnnAccuracyFloor = 0.965;      // c3
constexpr double kSdbnAccuracyFloor = 0.94;      // c4
constexpr double kNoiseMidBandLo = 0.38;         // c5: test-only normal at 0.15
constexpr double kNoiseMidBandHi = 0.60;         // c5
constexpr double kTrainNoiseSlack = 0.005;       // c5: train-only 0.02 vs clean
constexpr double kBothNoiseCeiling = 0.20;       // c5: both splits at 0.1
constexpr double kCornerSpreadLimit = 0.015;     // c6
constexpr double kCampaignSuccessFloor = 0.5;    // c7: strict >
constexpr int kCampaignSamples = 50;             // c7, c8
constexpr int kAttackCandidateFives = 10;        // c7: fives tried for the single trace
constexpr double kInvariantBudgetSeconds = 60.0; // c9
constexpr int kRoundTrips = 1000;                // c10
constexpr double kSpikeAgreementFloor = 0.90;    // spike_agreement
constexpr int kSpikeAgreementImages = 500;       // spike_agreement

// ---- plumbing ---------------------------------------------------------------

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

std::string data_dir() { return env_or("SPIKEADV_DATA_DIR", ""); }
fs::path work_dir() {
  const fs::path p = env_or("SPIKEADV_WORK_DIR", "/tmp/spikeadv_accept");
  fs::create_directories(p);
  return p;
}

int report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << ": " << name << " " << detail << std::endl;
  return ok ? 0 : 1;
}

LabeledImageSet load01(LabeledImageSet::Split split) {
  return rescale(load_mnist_split(data_dir(), split), 0.0f, 1.0f);
}

// Reference training configurations.  The dense net uses library
// defaults; the belief net needs longer feature and readout schedules
// than the defaults to clear its accuracy floor.
DnnTrainConfig reference_dnn_config() { return DnnTrainConfig{}; }

SdbnTrainConfig reference_sdbn_config() {
  SdbnTrainConfig cfg;
  cfg.layer1.epochs = 30;
  cfg.layer2.epochs = 30;
  cfg.top.epochs = 100;
  return cfg;
}

DnnModel dnn_fixture() { return load_dnn((work_dir() / "dnn.bin").string()); }
SdbnModel sdbn_fixture() { return load_sdbn((work_dir() / "sdbn.bin").string()); }

// Trainer that ignores the training data and evaluates a frozen model;
// used for test-noise-only sweeps so fixture models are reused.
Trainer frozen_sdbn_trainer(SdbnModel model) {
  auto shared = std::make_shared<const SdbnModel>(std::move(model));
  return [shared](const LabeledImageSet&) -> Evaluator {
    return [shared](const LabeledImageSet& probe) { return sdbn_evaluate(*shared, probe); };
  };
}

Trainer live_sdbn_trainer() {
  const SdbnTrainConfig cfg = reference_sdbn_config();
  return [cfg](const LabeledImageSet& train) -> Evaluator {
    const SdbnModel model = sdbn_pretrain(train, cfg, &std::cerr);
    return [model](const LabeledImageSet& probe) { return sdbn_evaluate(model, probe); };
  };
}

double cell_or_fail(const AccuracyTable& t, const char* scenario, double magnitude) {
  for (const auto& col : t.columns) {
    if (col.scenario != scenario) continue;
    for (std::size_t i = 0; i < t.magnitudes.size(); ++i)
      if (t.magnitudes[i] == magnitude) {
        if (!col.cells[i].ok)
          throw std::runtime_error("cell failed to train: " + col.cells[i].error);
        return col.cells[i].accuracy;
      }
  }
  throw std::runtime_error(std::string("missing cell ") + scenario);
}

// ---- setup fixtures ---------------------------------------------------------

int setup_dnn() {
  const fs::path path = work_dir() / "dnn.bin";
  if (fs::exists(path)) {
    const DnnModel net = load_dnn(path.string());  // throws if unreadable
    (void)net;
    return report("setup-dnn", true, "cached model reused: " + path.string());
  }
  const auto train = load01(LabeledImageSet::Split::train);
  const auto test = load01(LabeledImageSet::Split::test);
  const DnnTrainConfig cfg = reference_dnn_config();
  const DnnModel net = dnn_train(train, cfg, &std::cerr);
  const double acc = dnn_evaluate(net, test);
  save_model(net, path.string(), {{"epochs", cfg.epochs}, {"test_accuracy", acc}},
             {{"seed", cfg.seed}});
  std::ostringstream d;
  d << "trained, test accuracy " << acc;
  return report("setup-dnn", true, d.str());
}

int setup_sdbn() {
  const fs::path path = work_dir() / "sdbn.bin";
  if (fs::exists(path)) {
    const SdbnModel model = load_sdbn(path.string());
    (void)model;
    return report("setup-sdbn", true, "cached model reused: " + path.string());
  }
  const auto train = load01(LabeledImageSet::Split::train);
  const auto test = load01(LabeledImageSet::Split::test);
  const SdbnTrainConfig cfg = reference_sdbn_config();
  const SdbnModel model = sdbn_pretrain(train, cfg, &std::cerr);
  const double acc = sdbn_evaluate(model, test);
  save_model(model, path.string(),
             {{"rbm_epochs", cfg.layer1.epochs}, {"top_epochs", cfg.top.epochs},
              {"test_accuracy", acc}},
             {{"layer1", cfg.layer1.seed}, {"layer2", cfg.layer2.seed}, {"top", cfg.top.seed}});
  std::ostringstream d;
  d << "trained, rate-mode test accuracy " << acc;
  return report("setup-sdbn", true, d.str());
}

// ---- c1: formula oracles ----------------------------------------------------

// Brute-force reimplementations, written against the defining formulas
// rather than the library code.

std::vector<double> brute_sd(const Image& img, const Window& w) {
  const int n = w.height * w.width;
  double mean = 0.0;
  for (int r = w.row0; r < w.row0 + w.height; ++r)
    for (int c = w.col0; c < w.col0 + w.width; ++c) mean += img.at(r, c);
  mean /= n;
  double total = 0.0;
  for (int r = w.row0; r < w.row0 + w.height; ++r)
    for (int c = w.col0; c < w.col0 + w.width; ++c) {
      const double d = img.at(r, c) - mean;
      total += d * d;
    }
  std::vector<double> out;
  for (int r = w.row0; r < w.row0 + w.height; ++r)
    for (int c = w.col0; c < w.col0 + w.width; ++c) {
      const double d = img.at(r, c) - mean;
      out.push_back(std::sqrt(std::max(0.0, total - d * d) / n));
    }
  return out;
}

double brute_distance(const Image& orig, const Image& adv, const Window& w) {
  const auto sd = brute_sd(orig, w);
  double total = 0.0;
  std::size_t k = 0;
  for (int r = w.row0; r < w.row0 + w.height; ++r)
    for (int c = w.col0; c < w.col0 + w.width; ++c, ++k)
      total += std::abs(static_cast<double>(adv.at(r, c)) - orig.at(r, c)) /
               std::max(sd[k], 1e-3);
  return total;
}

double brute_gap(const ProbabilityVector& p, int target) {
  double other = 0.0;
  for (int c = 0; c < kClasses; ++c)
    if (c != target) other = std::max(other, p[c]);
  return p[target] - other;
}

int c1_formula_oracles() {
  Rng rng(101);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    Image img;
    img.lo = 0.0f;
    img.hi = 1.0f;
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform01());
    Window w{static_cast<int>(rng.below(Image::kRows - 4)),
             static_cast<int>(rng.below(Image::kCols - 4)), 5, 5};

    const SdMap lib_sd = sd_map(img, w);
    const auto ref_sd = brute_sd(img, w);
    std::size_t k = 0;
    for (int r = w.row0; r < w.row0 + w.height; ++r)
      for (int c = w.col0; c < w.col0 + w.width; ++c, ++k)
        worst = std::max(worst, std::abs(lib_sd.at(r, c) - ref_sd[k]));

    Image adv = img;
    for (int j = 0; j < 8; ++j) {
      const int r = w.row0 + static_cast<int>(rng.below(w.height));
      const int c = w.col0 + static_cast<int>(rng.below(w.width));
      adv.at(r, c) = static_cast<float>(
          std::clamp(adv.at(r, c) + rng.uniform(-0.3, 0.3), 0.0, 1.0));
    }
    worst = std::max(worst, std::abs(distance(img, adv, w) - brute_distance(img, adv, w)));

    ProbabilityVector p{};
    double sum = 0.0;
    for (auto& v : p) sum += (v = rng.uniform01() + 1e-6);
    for (auto& v : p) v /= sum;
    const int target = static_cast<int>(rng.below(kClasses));
    worst = std::max(worst, std::abs(gap(p, target) - brute_gap(p, target)));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream d;
  d << "sd/distance/gap vs brute force on 1000 random 5x5 windows: worst |diff| " << worst
    << " (tol " << kOracleTolerance << "), " << secs << " s (budget " << kOracleBudgetSeconds
    << " s)";
  return report("c1", worst <= kOracleTolerance && secs < kOracleBudgetSeconds, d.str());
}

// ---- c2: analytic rate vs Monte-Carlo neuron --------------------------------

// The diffusion approximation holds in the mean-driven band, so sampled
// instances are kept only when the analytic rate reaches 20 Hz; relative
// error against a near-silent neuron would measure noise, not validity.
int c2_siegert_validity() {
  const NeuronParams p;
  Rng gen(53);
  double worst = 0.0;
  int kept = 0;
  long attempts = 0;
  while (kept < kSiegertInstances && attempts < 100000) {
    ++attempts;
    std::vector<double> rates, weights;
    for (int i = 0; i < 30; ++i) {
      rates.push_back(gen.uniform(20.0, 150.0));
      weights.push_back(gen.uniform(-0.04, 0.10));
    }
    const double bias = gen.uniform(0.0, 80.0);
    const double analytic = siegert_rate(rates, weights, bias, p);
    if (analytic < 20.0) continue;
    const double mc =
        testutil::mc_lif_rate_trials(rates, weights, bias, p, kSiegertSimSeconds,
                                     kSiegertTrials, 9000 + static_cast<std::uint64_t>(kept));
    worst = std::max(worst, std::abs(analytic - mc) / mc);
    ++kept;
  }
  std::ostringstream d;
  d << "analytic vs Monte-Carlo on " << kept << " neurons (>= 20 Hz band, "
    << kSiegertSimSeconds << " s x " << kSiegertTrials << " trials): worst relative error "
    << worst << " (tol " << kSiegertRelativeError << ")";
  return report("c2", kept == kSiegertInstances && worst <= kSiegertRelativeError, d.str());
}

// ---- c3/c4: reference accuracies --------------------------------------------

int c3_dnn_accuracy() {
  const DnnModel net = dnn_fixture();
  const double acc = dnn_evaluate(net, load01(LabeledImageSet::Split::test));
  std::ostringstream d;
  d << "dense net test accuracy " << acc << " (floor " << kDnnAccuracyFloor << ")";
  return report("c3", acc >= kDnnAccuracyFloor, d.str());
}

int c4_sdbn_accuracy() {
  const SdbnModel model = sdbn_fixture();
  const double acc = sdbn_evaluate(model, load01(LabeledImageSet::Split::test));
  std::ostringstream d;
  d << "belief net rate-mode test accuracy " << acc << " (floor " << kSdbnAccuracyFloor << ")";
  return report("c4", acc >= kSdbnAccuracyFloor, d.str());
}

// ---- c5: noise robustness trends --------------------------------------------

int c5_noise_trends() {
  const SdbnModel model = sdbn_fixture();
  const auto train = load01(LabeledImageSet::Split::train);
  const auto test = load01(LabeledImageSet::Split::test);
  const double clean = sdbn_evaluate(model, test);

  // Test-only noise reuses the frozen fixture.
  NoiseScenario tst;
  tst.apply = NoiseScenario::Apply::test_only;
  tst.dist = NoiseSpec::Dist::normal;
  tst.magnitudes = {0.02, 0.05, 0.08, 0.1, 0.15, 0.2, 0.3, 0.4};
  tst.seed = 71;
  const auto test_only = run_noise_sweep(frozen_sdbn_trainer(model), train, test, tst);
  std::vector<double> curve;
  for (double m : tst.magnitudes) curve.push_back(cell_or_fail(test_only, "test-only", m));

  bool monotone = true;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i] > curve[i - 1]) monotone = false;
  const double mid = curve[4];  // magnitude 0.15

  // Noisy-training cells retrain the reference configuration.
  NoiseScenario tr;
  tr.apply = NoiseScenario::Apply::train_only;
  tr.dist = NoiseSpec::Dist::uniform;
  tr.magnitudes = {0.02};
  tr.seed = 72;
  const double train_low =
      cell_or_fail(run_noise_sweep(live_sdbn_trainer(), train, test, tr), "train-only", 0.02);

  NoiseScenario both;
  both.apply = NoiseScenario::Apply::both;
  both.dist = NoiseSpec::Dist::normal;
  both.magnitudes = {0.1};
  both.seed = 73;
  const double both_mid =
      cell_or_fail(run_noise_sweep(live_sdbn_trainer(), train, test, both), "both", 0.1);

  const bool mid_ok = mid >= kNoiseMidBandLo && mid <= kNoiseMidBandHi;
  const bool train_ok = train_low >= clean - kTrainNoiseSlack;
  const bool both_ok = both_mid <= kBothNoiseCeiling;

  std::ostringstream d;
  d << "test-only normal curve " << (monotone ? "monotone nonincreasing" : "NOT monotone")
    << "; acc(0.15) " << mid << " in [" << kNoiseMidBandLo << "," << kNoiseMidBandHi
    << "]; train-only uniform(0.02) " << train_low << " vs clean " << clean << " - "
    << kTrainNoiseSlack << "; both normal(0.1) " << both_mid << " <= " << kBothNoiseCeiling;
  return report("c5", monotone && mid_ok && train_ok && both_ok, d.str());
}

// ---- c6: windowed noise -----------------------------------------------------

int c6_window_noise() {
  const SdbnModel model = sdbn_fixture();
  const auto train = load01(LabeledImageSet::Split::train);
  const auto test = load01(LabeledImageSet::Split::test);
  const double clean = sdbn_evaluate(model, test);

  const Window corner{0, 0, 5, 4};
  const Window center{10, 14, 5, 4};
  const std::vector<double> mags = {0.1, 0.2, 0.3};
  const auto table = run_window_noise(frozen_sdbn_trainer(model), train, test, corner, center,
                                      mags, NoiseSpec::Dist::normal, 74);

  double corner_min = clean, corner_max = clean;
  for (double m : mags) {
    const double a = cell_or_fail(table, "corner", m);
    corner_min = std::min(corner_min, a);
    corner_max = std::max(corner_max, a);
  }
  const double corner_hi = cell_or_fail(table, "corner", 0.3);
  const double center_hi = cell_or_fail(table, "center", 0.3);

  const bool flat = corner_max - corner_min < kCornerSpreadLimit;
  const bool ordered = center_hi < corner_hi;
  std::ostringstream d;
  d << "corner accuracy spread " << corner_max - corner_min << " (limit " << kCornerSpreadLimit
    << ") incl. clean " << clean << "; at 0.3 center " << center_hi << " < corner " << corner_hi;
  return report("c6", flat && ordered, d.str());
}

// ---- c7/c8: adversarial attacks ---------------------------------------------

AttackConfig reference_attack_config() {
  AttackConfig cfg;
  cfg.window = Window{11, 11, 5, 5};  // central high-variation block
  cfg.m = 10;
  cfg.delta = 0.1;
  cfg.d_max = 22.0;
  cfg.target = 3;
  cfg.max_iterations = 1000;
  return cfg;
}

struct SingleAttackCheck {
  bool found = false;
  int index = -1;
  int crossover_iteration = -1;
  bool strictly_increasing = false;
};

// Scans correctly-classified fives until one admits the reference attack:
// the target probability overtakes the source class within budget.
SingleAttackCheck attack_a_five(const Oracle& oracle, const LabeledImageSet& test) {
  const AttackConfig cfg = reference_attack_config();
  SingleAttackCheck out;
  int tried = 0;
  for (std::size_t i = 0; i < test.size() && tried < kAttackCandidateFives; ++i) {
    if (test.labels[i] != 5) continue;
    if (argmax(oracle(test.images[i])) != 5) continue;
    ++tried;
    const AttackTrace trace = generate_adversarial(oracle, test.images[i], cfg).second;
    int crossover = -1;
    for (std::size_t k = 0; k < trace.records.size(); ++k)
      if (trace.records[k].probs[cfg.target] > trace.records[k].probs[5]) {
        crossover = static_cast<int>(k);
        break;
      }
    bool increasing = true;
    for (std::size_t k = 1; k < trace.records.size(); ++k)
      if (trace.records[k].distance_value <= trace.records[k - 1].distance_value)
        increasing = false;
    if (crossover > 0 && increasing) {
      out.found = true;
      out.index = static_cast<int>(i);
      out.crossover_iteration = crossover;
      out.strictly_increasing = increasing;
      return out;
    }
  }
  return out;
}

double campaign_success_rate(const Oracle& oracle, const LabeledImageSet& test) {
  const auto picked = select_correctly_classified(oracle, test, kCampaignSamples);
  const auto entries = run_attack_campaign(oracle, test, picked, reference_attack_config());
  return summarize_campaign(entries).success_rate;
}

int c7_dnn_attack() {
  const DnnModel net = dnn_fixture();
  const Oracle oracle = dnn_oracle(net);
  const auto test = load01(LabeledImageSet::Split::test);

  const SingleAttackCheck single = attack_a_five(oracle, test);
  const double rate = campaign_success_rate(oracle, test);

  std::ostringstream d;
  if (single.found)
    d << "five at index " << single.index << ": target overtakes source at iteration "
      << single.crossover_iteration << " with strictly increasing distance; ";
  else
    d << "no tried five admitted the attack; ";
  d << "campaign success rate " << rate << " over " << kCampaignSamples << " digits (> "
    << kCampaignSuccessFloor << ")";
  return report("c7", single.found && rate > kCampaignSuccessFloor, d.str());
}

int c8_sdbn_attack_contrast() {
  const DnnModel net = dnn_fixture();
  const SdbnModel model = sdbn_fixture();
  const auto test = load01(LabeledImageSet::Split::test);
  const Oracle dnn = dnn_oracle(net);
  const Oracle sdbn = sdbn_oracle(model);

  const double dnn_rate = campaign_success_rate(dnn, test);

  const auto picked = select_correctly_classified(sdbn, test, kCampaignSamples);
  const auto entries = run_attack_campaign(sdbn, test, picked, reference_attack_config());
  const double sdbn_rate = summarize_campaign(entries).success_rate;

  // Non-monotone target probability: some step down and some step up in
  // one trace's target column.
  bool wavering = false;
  for (const auto& e : entries) {
    bool up = false, down = false;
    const int target = (e.label + 1) % kClasses;
    for (std::size_t k = 1; k < e.trace.records.size(); ++k) {
      const double prev = e.trace.records[k - 1].probs[target];
      const double cur = e.trace.records[k].probs[target];
      up = up || cur > prev;
      down = down || cur < prev;
    }
    if (up && down) {
      wavering = true;
      break;
    }
  }

  std::ostringstream d;
  d << "campaign success rates: belief net " << sdbn_rate << " < dense net " << dnn_rate
    << "; non-monotone target probability trace " << (wavering ? "present" : "ABSENT");
  return report("c8", sdbn_rate < dnn_rate && wavering, d.str());
}

// ---- c9: attack invariants --------------------------------------------------

// Smooth synthetic oracle: the target probability tracks the window mean,
// the rest is spread evenly.
Oracle mean_tracking_oracle(int target, Window w) {
  return [target, w](const Image& img) {
    double mean = 0.0;
    for (int r = w.row0; r < w.row0 + w.height; ++r)
      for (int c = w.col0; c < w.col0 + w.width; ++c) mean += img.at(r, c);
    mean /= w.height * w.width;
    const double pt = std::clamp(mean, 0.01, 0.99);
    ProbabilityVector p{};
    for (int c = 0; c < kClasses; ++c) p[c] = (1.0 - pt) / (kClasses - 1);
    p[target] = pt;
    return p;
  };
}

int c9_attack_invariants() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(907);
  bool ok = true;
  std::string why = "locality, query audit, distance cap, determinism on 30 random runs";

  for (int run = 0; run < 30 && ok; ++run) {
    AttackConfig cfg;
    const int side = 3 + static_cast<int>(rng.below(4));
    cfg.window = Window{static_cast<int>(rng.below(Image::kRows - side)),
                        static_cast<int>(rng.below(Image::kCols - side)), side, side};
    cfg.m = 1 + static_cast<int>(rng.below(4));
    cfg.delta = rng.uniform(0.05, 0.2);
    cfg.d_max = run % 7 == 0 ? 0.0 : rng.uniform(0.5, 40.0);
    cfg.target = static_cast<int>(rng.below(kClasses));
    cfg.max_iterations = 1 + static_cast<int>(rng.below(30));

    Image img;
    img.lo = 0.0f;
    img.hi = 1.0f;
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform(0.1, 0.4));

    long queries = 0;
    const Oracle base = mean_tracking_oracle(cfg.target, cfg.window);
    const Oracle counting = [&queries, &base](const Image& probe) {
      ++queries;
      return base(probe);
    };

    const auto [adv, trace] = generate_adversarial(counting, img, cfg);

    // Locality: pixels outside the window are untouched.
    for (int r = 0; r < Image::kRows; ++r)
      for (int c = 0; c < Image::kCols; ++c) {
        const bool inside = r >= cfg.window.row0 && r < cfg.window.row0 + cfg.window.height &&
                            c >= cfg.window.col0 && c < cfg.window.col0 + cfg.window.width;
        if (!inside && adv.at(r, c) != img.at(r, c)) {
          ok = false;
          why = "locality violated";
        }
      }

    // Query audit: per round 2*pixels probes, plus 1 probe per accepted
    // round and 1 initial probe.  Rejection rounds add no acceptance probe.
    const long per_round = 2L * cfg.window.height * cfg.window.width;
    const long accepted = trace.iterations();
    const long rounds = accepted + (trace.rejected ? 1 : 0);
    const long expected = 1 + rounds * per_round + accepted;
    if (queries != expected) {
      ok = false;
      std::ostringstream w;
      w << "query audit: counted " << queries << " expected " << expected;
      why = w.str();
    }

    // Distance cap: every accepted state stays strictly under the budget.
    for (const auto& rec : trace.records)
      if (rec.distance_value >= cfg.d_max && !(rec.iteration == 0 && cfg.d_max == 0.0)) {
        ok = false;
        why = "distance cap violated";
      }
    if (cfg.d_max == 0.0 && queries != 1) {
      ok = false;
      why = "zero budget must cost exactly the initial probe";
    }

    // Determinism: the rerun reproduces the trace exactly.
    const auto [adv2, trace2] = generate_adversarial(base, img, cfg);
    if (trace2.records.size() != trace.records.size()) {
      ok = false;
      why = "nondeterministic record count";
    } else {
      for (std::size_t k = 0; k < trace.records.size(); ++k) {
        if (trace2.records[k].probs != trace.records[k].probs ||
            trace2.records[k].distance_value != trace.records[k].distance_value) {
          ok = false;
          why = "nondeterministic trace";
        }
      }
      for (int p = 0; p < Image::kPixels; ++p)
        if (adv2.pixels[p] != adv.pixels[p]) {
          ok = false;
          why = "nondeterministic image";
        }
    }
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream d;
  d << why << ", " << secs << " s (budget " << kInvariantBudgetSeconds << " s)";
  return report("c9", ok && secs < kInvariantBudgetSeconds, d.str());
}

// ---- c10: persistence -------------------------------------------------------

int c10_persistence() {
  Rng rng(4077);
  const fs::path dir = work_dir() / "roundtrip";
  fs::create_directories(dir);
  const std::string path_a = (dir / "a.bin").string();
  const std::string path_b = (dir / "b.bin").string();

  auto random_matrix = [&rng](int rows, int cols) {
    Eigen::MatrixXf m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      switch (rng.below(16)) {
        case 0: m(i) = std::numeric_limits<float>::quiet_NaN(); break;
        case 1: m(i) = std::numeric_limits<float>::infinity(); break;
        case 2: m(i) = -std::numeric_limits<float>::infinity(); break;
        case 3: m(i) = -0.0f; break;
        case 4: m(i) = 1e-42f; break;  // denormal
        default: m(i) = static_cast<float>(rng.normal(0.0, 2.0));
      }
    }
    return m;
  };
  auto read_all = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  auto bits_equal = [](const Eigen::MatrixXf& a, const Eigen::MatrixXf& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (std::bit_cast<std::uint32_t>(a(i)) != std::bit_cast<std::uint32_t>(b(i)))
        return false;
    return true;
  };

  bool ok = true;
  std::string why = "bit-exact";
  for (int iter = 0; iter < kRoundTrips && ok; ++iter) {
    ModelFile mf;
    mf.kind = iter % 2 == 0 ? "dnn" : "sdbn";
    const int layers = 1 + static_cast<int>(rng.below(3));
    int prev = 1 + static_cast<int>(rng.below(20));
    mf.topology = {prev};
    for (int l = 0; l < layers; ++l) {
      const int next = 1 + static_cast<int>(rng.below(20));
      mf.topology.push_back(next);
      if (mf.kind == "dnn") {
        mf.tensors.emplace_back("layer" + std::to_string(l) + ".W", random_matrix(prev, next));
        mf.tensors.emplace_back("layer" + std::to_string(l) + ".b", random_matrix(next, 1));
      } else {
        mf.tensors.emplace_back("rbm" + std::to_string(l) + ".W", random_matrix(prev, next));
        mf.tensors.emplace_back("rbm" + std::to_string(l) + ".b_v", random_matrix(prev, 1));
        mf.tensors.emplace_back("rbm" + std::to_string(l) + ".b_h", random_matrix(next, 1));
      }
      prev = next;
    }
    mf.neuron = {{"tau_m", 0.02}, {"t_ref", 0.002}, {"v_th", 1.0},
                 {"v_reset", 0.0}, {"r_max", 500.0}};
    mf.training = {{"iter", iter}};
    mf.seeds = {{"seed", iter}};

    write_model_file(mf, path_a);
    const ModelFile back = read_model_file(path_a);
    write_model_file(back, path_b);
    if (read_all(path_a) != read_all(path_b)) {
      ok = false;
      why = "byte streams differ";
      break;
    }
    if (back.tensors.size() != mf.tensors.size()) {
      ok = false;
      why = "tensor count changed";
      break;
    }
    for (std::size_t t = 0; t < mf.tensors.size(); ++t)
      if (back.tensors[t].first != mf.tensors[t].first ||
          !bits_equal(back.tensors[t].second, mf.tensors[t].second)) {
        ok = false;
        why = "tensor bits changed";
      }
  }
  std::ostringstream d;
  d << kRoundTrips << " random model round-trips: " << why;
  return report("c10", ok, d.str());
}

// ---- spike agreement --------------------------------------------------------

// Supplementary gate: the spiking simulation must agree with the
// deterministic rate forward on most test digits, otherwise the spiking
// attack surface would measure a different classifier.
int spike_agreement() {
  const SdbnModel model = sdbn_fixture();
  const auto test = load01(LabeledImageSet::Split::test);
  SimConfig sim;
  sim.duration = 1.0;
  sim.repeats = 3;

  int agree = 0;
  for (int i = 0; i < kSpikeAgreementImages; ++i) {
    const Image& img = test.images[static_cast<std::size_t>(i)];
    SimConfig per = sim;
    per.seed = derive_seed(4242, static_cast<std::uint64_t>(i));
    const auto fwd = sdbn_spike_forward(model, img, per);
    if (argmax(fwd.probabilities) == argmax(sdbn_rate_forward(model, img))) ++agree;
  }
  const double frac = static_cast<double>(agree) / kSpikeAgreementImages;
  std::ostringstream d;
  d << "spiking vs rate argmax agreement " << frac << " on " << kSpikeAgreementImages
    << " digits (floor " << kSpikeAgreementFloor << ")";
  return report("spike_agreement", frac >= kSpikeAgreementFloor, d.str());
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<int()>> cases = {
      {"setup-dnn", setup_dnn},
      {"setup-sdbn", setup_sdbn},
      {"c1", c1_formula_oracles},
      {"c2", c2_siegert_validity},
      {"c3", c3_dnn_accuracy},
      {"c4", c4_sdbn_accuracy},
      {"c5", c5_noise_trends},
      {"c6", c6_window_noise},
      {"c7", c7_dnn_attack},
      {"c8", c8_sdbn_attack_contrast},
      {"c9", c9_attack_invariants},
      {"c10", c10_persistence},
      {"spike_agreement", spike_agreement},
  };
  if (argc != 2 || !cases.count(argv[1])) {
    std::cerr << "usage: acceptance <case>\ncases:";
    for (const auto& [name, fn] : cases) std::cerr << " " << name;
    std::cerr << "\n";
    return 2;
  }
  try {
    return cases.at(argv[1])();
  } catch (const std::exception& e) {
    return report(argv[1], false, std::string("exception: ") + e.what());
  }
}
