#pragma once

// Experiment orchestration: noise-robustness sweeps over full images or
// pixel windows, and targeted attack campaigns.  Training and evaluation
// enter as callables, so every orchestration path is testable with
// synthetic models and datasets; nothing here depends on a concrete
// network type.

#include <cmath>
#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spikeadv/attack.hpp"
#include "spikeadv/classify.hpp"
#include "spikeadv/image.hpp"
#include "spikeadv/noise.hpp"
#include "spikeadv/rng.hpp"

namespace spikeadv {

// Maps a labeled set to accuracy in [0,1].
using Evaluator = std::function<double(const LabeledImageSet&)>;
// Trains on its argument and returns the trained net's evaluator.  A
// trainer owns its seeds: equal inputs must yield an equal evaluator, so
// that retrain-per-magnitude sweeps vary only in the injected noise.
using Trainer = std::function<Evaluator(const LabeledImageSet&)>;

struct NoiseScenario {
  enum class Apply { train_only, test_only, both };

  Apply apply = Apply::test_only;
  NoiseSpec::Dist dist = NoiseSpec::Dist::normal;
  std::vector<double> magnitudes;
  std::optional<Window> region;  // absent = whole image
  std::uint64_t seed = 0;
};

inline const char* to_string(NoiseScenario::Apply a) {
  switch (a) {
    case NoiseScenario::Apply::train_only: return "train-only";
    case NoiseScenario::Apply::test_only: return "test-only";
    case NoiseScenario::Apply::both: return "both";
  }
  throw std::logic_error("to_string: bad Apply");
}

inline const char* to_string(NoiseSpec::Dist d) {
  switch (d) {
    case NoiseSpec::Dist::normal: return "normal";
    case NoiseSpec::Dist::uniform: return "uniform";
  }
  throw std::logic_error("to_string: bad Dist");
}

struct AccuracyCell {
  double accuracy = 0.0;
  bool ok = false;
  std::string error;  // failure note when !ok; the sweep continues past it
};

// Accuracy grid: one row per magnitude, one column per (scenario label,
// distribution label) pair.
struct AccuracyTable {
  struct Column {
    std::string scenario;
    std::string distribution;
    std::vector<AccuracyCell> cells;  // one per magnitude
  };

  std::vector<double> magnitudes;
  std::vector<Column> columns;
};

// Stable external schema; failed cells render as nan.
inline std::string accuracy_csv(const AccuracyTable& t) {
  std::ostringstream out;
  out << "magnitude,scenario,distribution,accuracy\n";
  for (std::size_t i = 0; i < t.magnitudes.size(); ++i)
    for (const auto& col : t.columns) {
      out << t.magnitudes[i] << ',' << col.scenario << ',' << col.distribution << ',';
      const AccuracyCell& cell = col.cells.at(i);
      if (cell.ok) {
        char acc[16];
        std::snprintf(acc, sizeof acc, "%.4f", cell.accuracy);
        out << acc;
      } else {
        out << "nan";
      }
      out << '\n';
    }
  return out.str();
}

// Joins tables produced over the same magnitude grid into one.
inline void append_columns(AccuracyTable& into, const AccuracyTable& from) {
  if (into.columns.empty() && into.magnitudes.empty()) {
    into.magnitudes = from.magnitudes;
  } else if (into.magnitudes != from.magnitudes) {
    throw std::invalid_argument("append_columns: magnitude grids differ");
  }
  into.columns.insert(into.columns.end(), from.columns.begin(), from.columns.end());
}

namespace detail {

inline void check_scenario(const NoiseScenario& sc) {
  if (sc.magnitudes.empty())
    throw std::invalid_argument("noise scenario: magnitudes must be nonempty");
  for (double m : sc.magnitudes)
    if (!(m >= 0.0) || !std::isfinite(m))
      throw std::invalid_argument("noise scenario: magnitudes must be finite and >= 0");
  if (sc.region && !sc.region->inside_grid())
    throw std::invalid_argument("noise scenario: region outside the image grid");
}

inline AccuracyCell run_cell(const std::function<double()>& body) {
  AccuracyCell cell;
  try {
    cell.accuracy = body();
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

}  // namespace detail

// One scenario, one column: per magnitude the train and/or test split is
// noised (per-cell derived seeds) and the trainer/evaluator pair scores
// the result.  Train-affecting magnitudes retrain from scratch; test-only
// scenarios train the baseline once.  Cell failures are recorded and the
// sweep continues.
inline AccuracyTable run_noise_sweep(const Trainer& trainer, const LabeledImageSet& train,
                                     const LabeledImageSet& test, const NoiseScenario& sc) {
  detail::check_scenario(sc);
  const bool noisy_train =
      sc.apply == NoiseScenario::Apply::train_only || sc.apply == NoiseScenario::Apply::both;
  const bool noisy_test =
      sc.apply == NoiseScenario::Apply::test_only || sc.apply == NoiseScenario::Apply::both;

  Evaluator baseline;
  if (!noisy_train) baseline = trainer(train);

  AccuracyTable table;
  table.magnitudes = sc.magnitudes;
  AccuracyTable::Column col;
  col.scenario = to_string(sc.apply);
  col.distribution = to_string(sc.dist);
  for (std::size_t i = 0; i < sc.magnitudes.size(); ++i) {
    NoiseSpec spec;
    spec.dist = sc.dist;
    spec.magnitude = sc.magnitudes[i];
    spec.region = sc.region;
    col.cells.push_back(detail::run_cell([&, i] {
      const Evaluator eval =
          noisy_train ? trainer(apply_noise(train, spec, derive_seed(sc.seed, 2 * i)))
                      : baseline;
      const LabeledImageSet* probe = &test;
      LabeledImageSet noised;
      if (noisy_test) {
        noised = apply_noise(test, spec, derive_seed(sc.seed, 2 * i + 1));
        probe = &noised;
      }
      return eval(*probe);
    }));
  }
  table.columns.push_back(std::move(col));
  return table;
}

// Same-magnitude comparison of two 20-pixel windows (the image corner
// versus the digit area).  Noise is applied to the test split only; the
// model is trained once on clean data.
inline AccuracyTable run_window_noise(const Trainer& trainer, const LabeledImageSet& train,
                                      const LabeledImageSet& test, const Window& corner,
                                      const Window& center, const std::vector<double>& magnitudes,
                                      NoiseSpec::Dist dist = NoiseSpec::Dist::normal,
                                      std::uint64_t seed = 0) {
  for (const auto* w : {&corner, &center}) {
    if (!w->inside_grid())
      throw std::invalid_argument("run_window_noise: window outside the image grid");
    if (w->size() != 20)
      throw std::invalid_argument("run_window_noise: windows must cover 20 pixels");
  }

  const Evaluator eval = trainer(train);
  AccuracyTable table;
  table.magnitudes = magnitudes;
  const std::pair<const char*, const Window*> runs[] = {{"corner", &corner},
                                                        {"center", &center}};
  for (std::size_t which = 0; which < 2; ++which) {
    NoiseScenario sc;
    sc.apply = NoiseScenario::Apply::test_only;
    sc.dist = dist;
    sc.magnitudes = magnitudes;
    sc.region = *runs[which].second;
    sc.seed = seed;
    detail::check_scenario(sc);

    AccuracyTable::Column col;
    col.scenario = runs[which].first;
    col.distribution = to_string(dist);
    for (std::size_t i = 0; i < magnitudes.size(); ++i) {
      NoiseSpec spec;
      spec.dist = dist;
      spec.magnitude = magnitudes[i];
      spec.region = *runs[which].second;
      col.cells.push_back(detail::run_cell([&, i] {
        return eval(apply_noise(test, spec, derive_seed(seed, 2 * i + which)));
      }));
    }
    table.columns.push_back(std::move(col));
  }
  return table;
}

// ---- attack campaigns ------------------------------------------------------

// Indices of the first `count` samples the oracle classifies correctly.
inline std::vector<int> select_correctly_classified(const Oracle& oracle,
                                                    const LabeledImageSet& set,
                                                    std::size_t count) {
  check_labels(set);
  std::vector<int> picked;
  for (std::size_t i = 0; i < set.size() && picked.size() < count; ++i)
    if (argmax(oracle(set.images[i])) == set.labels[i]) picked.push_back(static_cast<int>(i));
  return picked;
}

struct CampaignEntry {
  int index = -1;   // position in the source set
  int label = -1;   // true class
  Image adversarial;
  AttackTrace trace;
  bool ok = false;
  std::string error;  // abort note when !ok; trace holds the partial run
};

struct CampaignSummary {
  std::size_t attempted = 0;
  std::size_t completed = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;        // successes / attempted
  double mean_final_distance = 0.0; // over completed entries
  double mean_iterations = 0.0;     // over completed entries
};

// Pure function of the entries, so summaries are recomputable from stored
// traces alone.
inline CampaignSummary summarize_campaign(const std::vector<CampaignEntry>& entries) {
  CampaignSummary s;
  s.attempted = entries.size();
  for (const auto& e : entries) {
    if (!e.ok) continue;
    s.completed += 1;
    if (e.trace.status == AttackStatus::success) s.successes += 1;
    if (!e.trace.records.empty()) {
      s.mean_final_distance += e.trace.records.back().distance_value;
      s.mean_iterations += static_cast<double>(e.trace.iterations());
    }
  }
  if (s.attempted > 0)
    s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.attempted);
  if (s.completed > 0) {
    s.mean_final_distance /= static_cast<double>(s.completed);
    s.mean_iterations /= static_cast<double>(s.completed);
  }
  return s;
}

// Attacks each selected sample with the target remapped to
// (label + 1) mod 10.  Per-sample failures are recorded and the campaign
// continues; aborted entries keep their partial trace.
inline std::vector<CampaignEntry> run_attack_campaign(const Oracle& oracle,
                                                      const LabeledImageSet& set,
                                                      const std::vector<int>& indices,
                                                      const AttackConfig& base) {
  check_labels(set);
  std::vector<CampaignEntry> entries;
  entries.reserve(indices.size());
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= set.size())
      throw std::invalid_argument("run_attack_campaign: sample index out of range");
    CampaignEntry entry;
    entry.index = idx;
    entry.label = set.labels[idx];
    AttackConfig cfg = base;
    cfg.target = (entry.label + 1) % kClasses;
    try {
      auto [adv, trace] = generate_adversarial(oracle, set.images[idx], cfg);
      entry.adversarial = std::move(adv);
      entry.trace = std::move(trace);
      entry.ok = true;
    } catch (const AttackAbort& e) {
      entry.trace = e.partial();
      entry.error = e.what();
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

// Completed adversarial images with their original labels, ready for IDX
// export next to the clean originals.
inline LabeledImageSet adversarial_set(const std::vector<CampaignEntry>& entries) {
  LabeledImageSet out;
  out.split = LabeledImageSet::Split::test;
  for (const auto& e : entries) {
    if (!e.ok) continue;
    out.images.push_back(e.adversarial);
    out.labels.push_back(e.label);
  }
  return out;
}

inline nlohmann::json campaign_json(const std::vector<CampaignEntry>& entries) {
  const CampaignSummary s = summarize_campaign(entries);
  nlohmann::json per_sample = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j;
    j["index"] = e.index;
    j["label"] = e.label;
    j["target"] = e.trace.config.target;
    j["ok"] = e.ok;
    if (!e.ok) j["error"] = e.error;
    j["status"] = to_string(e.trace.status);
    if (!e.trace.records.empty()) {
      j["final_distance"] = e.trace.records.back().distance_value;
      j["final_gap"] = e.trace.records.back().gap_value;
      j["iterations"] = e.trace.iterations();
    }
    per_sample.push_back(std::move(j));
  }
  return {{"attempted", s.attempted},
          {"completed", s.completed},
          {"successes", s.successes},
          {"success_rate", s.success_rate},
          {"mean_final_distance", s.mean_final_distance},
          {"mean_iterations", s.mean_iterations},
          {"samples", std::move(per_sample)}};
}

}  // namespace spikeadv
