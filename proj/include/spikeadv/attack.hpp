#pragma once

// Greedy targeted black-box attack on a probability oracle.
//
// The attack perturbs pixels inside a search window, M per round, chosen
// by how much a single-pixel probe improves the gap between the target
// class and the strongest other class, weighted by the local standard
// deviation so visually busy pixels are preferred.  Perceptual cost is
// the SD-normalized absolute change against the pristine original; a
// candidate whose cost reaches d_max is discarded and the attack stops.
// The model is only ever touched through Image -> ProbabilityVector
// calls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikeadv/classify.hpp"
#include "spikeadv/image.hpp"

namespace spikeadv {

// Perceptual-distance floor for zero-SD (uniform) regions, where any
// change is maximally visible.
inline constexpr double kSdFloor = 1e-3;

struct AttackConfig {
  Window window;             // search area
  int m = 10;                // pixels perturbed per round
  double delta = 0.1;        // perturbation unit, intensity units
  double d_max = 22.0;       // perceptual distance budget
  int target = 0;            // class the attack drives toward
  int max_iterations = 1000; // safety cap on accepted rounds
};

enum class PerturbSign { add, subtract };

struct PerturbedPixel {
  int row;
  int col;
  PerturbSign sign;

  bool operator==(const PerturbedPixel&) const = default;
};

// Per-pixel standard deviations over a window.  For pixel (i,j) the value
// is sqrt((S - (x_ij - mu)^2) / n) where mu is the window mean, S the
// total squared deviation over the window and n the window pixel count:
// the probed pixel's own deviation is excluded from the numerator.
struct SdMap {
  Window window;
  std::vector<double> sd;  // window row-major

  double at(int row, int col) const {
    if (!window.contains(row, col)) throw std::out_of_range("SdMap::at: outside window");
    return sd[static_cast<std::size_t>(row - window.row0) * window.width + (col - window.col0)];
  }
};

inline SdMap sd_map(const Image& img, const Window& window) {
  if (!window.inside_grid()) throw std::invalid_argument("sd_map: bad window");
  const int n = window.size();
  double mean = 0.0;
  for (int r = 0; r < window.height; ++r)
    for (int c = 0; c < window.width; ++c)
      mean += img.at(window.row0 + r, window.col0 + c);
  mean /= n;

  double total = 0.0;
  for (int r = 0; r < window.height; ++r)
    for (int c = 0; c < window.width; ++c) {
      const double d = img.at(window.row0 + r, window.col0 + c) - mean;
      total += d * d;
    }

  SdMap map;
  map.window = window;
  map.sd.resize(static_cast<std::size_t>(n));
  for (int r = 0; r < window.height; ++r)
    for (int c = 0; c < window.width; ++c) {
      const double d = img.at(window.row0 + r, window.col0 + c) - mean;
      // Rounding can push the difference a hair below zero.
      const double v = std::max(0.0, total - d * d);
      map.sd[static_cast<std::size_t>(r) * window.width + c] =
          std::sqrt(v / static_cast<double>(n));
    }
  return map;
}

// SD-normalized perceptual distance of the cumulative change inside the
// window, measured against the pristine original and its SD map.
inline double distance(const Image& original, const Image& adversarial, const Window& window) {
  const SdMap sd = sd_map(original, window);
  double d = 0.0;
  for (int r = window.row0; r < window.row0 + window.height; ++r)
    for (int c = window.col0; c < window.col0 + window.width; ++c) {
      const double delta = std::abs(static_cast<double>(adversarial.at(r, c)) - original.at(r, c));
      d += delta / std::max(sd.at(r, c), kSdFloor);
    }
  return d;
}

// Margin of the target class over the strongest other class.
inline double gap(const ProbabilityVector& probs, int target) {
  if (target < 0 || target >= kClasses) throw std::invalid_argument("gap: bad target class");
  double best_other = 0.0;
  for (int c = 0; c < kClasses; ++c)
    if (c != target) best_other = std::max(best_other, probs[c]);
  return probs[target] - best_other;
}

struct AttackRecord {
  int iteration = 0;
  ProbabilityVector probs{};
  double gap_value = 0.0;
  double distance_value = 0.0;
  std::vector<PerturbedPixel> perturbed;
  Image image;
};

enum class AttackStatus { success, distance_exhausted, iteration_capped };

inline const char* to_string(AttackStatus s) {
  switch (s) {
    case AttackStatus::success: return "success";
    case AttackStatus::distance_exhausted: return "distance-exhausted";
    default: return "iteration-capped";
  }
}

struct RejectedCandidate {
  double distance_value = 0.0;
  std::vector<PerturbedPixel> perturbed;
};

struct AttackTrace {
  AttackConfig config;
  std::vector<AttackRecord> records;  // records[0] is the unperturbed state
  std::optional<RejectedCandidate> rejected;  // final candidate over budget
  AttackStatus status = AttackStatus::distance_exhausted;
  int source_class = 0;  // argmax of the original image's probabilities

  int iterations() const { return static_cast<int>(records.size()) - 1; }
};

// Oracle failure during an attack; carries whatever was recorded before
// the failing query and the pixel being probed.
class AttackAbort : public std::runtime_error {
 public:
  AttackAbort(const std::string& what, int row, int col, AttackTrace partial)
      : std::runtime_error(what), row_(row), col_(col), partial_(std::move(partial)) {}

  int row() const { return row_; }
  int col() const { return col_; }
  const AttackTrace& partial() const { return partial_; }

 private:
  int row_;
  int col_;
  AttackTrace partial_;
};

struct PixelPriority {
  int row = 0;
  int col = 0;
  double priority = 0.0;
  PerturbSign sign = PerturbSign::add;
};

namespace detail {

inline void check_attack_config(const AttackConfig& cfg) {
  if (!cfg.window.inside_grid()) throw std::invalid_argument("attack: bad window");
  if (cfg.m <= 0 || cfg.m > cfg.window.size())
    throw std::invalid_argument("attack: m must be in 1..window size");
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("attack: delta must be positive");
  if (cfg.d_max < 0.0) throw std::invalid_argument("attack: negative d_max");
  if (cfg.target < 0 || cfg.target >= kClasses)
    throw std::invalid_argument("attack: bad target class");
  if (cfg.max_iterations < 0) throw std::invalid_argument("attack: negative iteration cap");
}

inline ProbabilityVector probe(const Oracle& oracle, const Image& img, int row, int col,
                               const AttackTrace& partial) {
  try {
    return oracle(img);
  } catch (const AttackAbort&) {
    throw;
  } catch (const std::exception& e) {
    throw AttackAbort(std::string("attack: oracle failed at pixel (") + std::to_string(row) +
                          "," + std::to_string(col) + "): " + e.what(),
                      row, col, partial);
  }
}

}  // namespace detail

// One probing round: for every window pixel, query the oracle with that
// pixel alone moved by +delta and by -delta (clamped to the declared
// range) and score the better direction's gap improvement, weighted by
// the pixel's SD on the current image.  Equal improvements take the add
// sign.  Issues 2 queries per window pixel, plus one base query when
// base_probs is not supplied.  The map is returned in window row-major
// order; base_out (if non-null) receives the base probabilities.
inline std::vector<PixelPriority> variation_priority(const Image& img, const Oracle& oracle,
                                                     const AttackConfig& cfg,
                                                     const ProbabilityVector* base_probs = nullptr,
                                                     ProbabilityVector* base_out = nullptr) {
  detail::check_attack_config(cfg);
  const AttackTrace no_trace;  // probes outside generate_adversarial carry no records
  const ProbabilityVector base =
      base_probs ? *base_probs
                 : detail::probe(oracle, img, cfg.window.row0, cfg.window.col0, no_trace);
  if (base_out) *base_out = base;
  const double base_gap = gap(base, cfg.target);
  const SdMap sd = sd_map(img, cfg.window);

  std::vector<PixelPriority> out;
  out.reserve(static_cast<std::size_t>(cfg.window.size()));
  Image probe_img = img;
  for (int r = cfg.window.row0; r < cfg.window.row0 + cfg.window.height; ++r)
    for (int c = cfg.window.col0; c < cfg.window.col0 + cfg.window.width; ++c) {
      const float saved = probe_img.at(r, c);
      probe_img.at(r, c) =
          std::min(img.hi, saved + static_cast<float>(cfg.delta));
      const double gap_add = gap(detail::probe(oracle, probe_img, r, c, no_trace), cfg.target);
      probe_img.at(r, c) =
          std::max(img.lo, saved - static_cast<float>(cfg.delta));
      const double gap_sub = gap(detail::probe(oracle, probe_img, r, c, no_trace), cfg.target);
      probe_img.at(r, c) = saved;

      PixelPriority p;
      p.row = r;
      p.col = c;
      if (gap_sub > gap_add) {
        p.sign = PerturbSign::subtract;
        p.priority = (gap_sub - base_gap) * sd.at(r, c);
      } else {
        p.sign = PerturbSign::add;
        p.priority = (gap_add - base_gap) * sd.at(r, c);
      }
      out.push_back(p);
    }
  return out;
}

// Full greedy attack.  Rounds continue until the perceptual budget or the
// iteration cap is exhausted; the attack does not stop early on a
// misclassification, it keeps widening the gap while budget remains.
// The returned status is success when the final image's argmax equals
// the target, otherwise the reason the loop stopped.
inline std::pair<Image, AttackTrace> generate_adversarial(const Oracle& oracle,
                                                          const Image& original,
                                                          const AttackConfig& cfg) {
  detail::check_attack_config(cfg);

  AttackTrace trace;
  trace.config = cfg;
  Image current = original;
  ProbabilityVector current_probs =
      detail::probe(oracle, original, cfg.window.row0, cfg.window.col0, trace);
  trace.source_class = argmax(current_probs);
  trace.records.push_back(
      {0, current_probs, gap(current_probs, cfg.target), 0.0, {}, original});

  double current_distance = 0.0;
  AttackStatus stop = AttackStatus::iteration_capped;
  int iteration = 0;
  while (iteration < cfg.max_iterations) {
    if (current_distance >= cfg.d_max) {
      stop = AttackStatus::distance_exhausted;
      break;
    }
    std::vector<PixelPriority> priorities;
    try {
      priorities = variation_priority(current, oracle, cfg, &current_probs);
    } catch (AttackAbort& abort) {
      throw AttackAbort(abort.what(), abort.row(), abort.col(), std::move(trace));
    }
    // Highest priority first; ties in row-major pixel order.
    std::stable_sort(priorities.begin(), priorities.end(),
                     [](const PixelPriority& a, const PixelPriority& b) {
                       return a.priority > b.priority;
                     });

    Image candidate = current;
    std::vector<PerturbedPixel> perturbed;
    perturbed.reserve(static_cast<std::size_t>(cfg.m));
    for (int k = 0; k < cfg.m; ++k) {
      const PixelPriority& p = priorities[static_cast<std::size_t>(k)];
      float& px = candidate.at(p.row, p.col);
      if (p.sign == PerturbSign::add)
        px = std::min(candidate.hi, px + static_cast<float>(cfg.delta));
      else
        px = std::max(candidate.lo, px - static_cast<float>(cfg.delta));
      perturbed.push_back({p.row, p.col, p.sign});
    }

    const double candidate_distance = distance(original, candidate, cfg.window);
    if (candidate_distance >= cfg.d_max) {
      trace.rejected = RejectedCandidate{candidate_distance, std::move(perturbed)};
      stop = AttackStatus::distance_exhausted;
      break;
    }

    current = candidate;
    current_distance = candidate_distance;
    try {
      current_probs = detail::probe(oracle, current, -1, -1, trace);
    } catch (AttackAbort& abort) {
      throw AttackAbort(abort.what(), abort.row(), abort.col(), std::move(trace));
    }
    ++iteration;
    trace.records.push_back({iteration, current_probs, gap(current_probs, cfg.target),
                             current_distance, std::move(perturbed), current});
  }

  trace.status =
      argmax(current_probs) == cfg.target ? AttackStatus::success : stop;
  return {current, trace};
}

// CSV rendering of a trace: one row per accepted state.  The first row is
// the unperturbed image ("initial"), interior rows are "accepted", and
// the last row carries the final status.
inline void attack_report(const AttackTrace& trace, std::ostream& out) {
  if (trace.records.empty()) throw std::invalid_argument("attack_report: empty trace");
  out << "iter,p_source,p_target,gap,distance,status\n";
  const std::size_t last = trace.records.size() - 1;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const AttackRecord& rec = trace.records[i];
    const char* status = i == last ? to_string(trace.status)
                         : i == 0  ? "initial"
                                   : "accepted";
    out << rec.iteration << ',' << rec.probs[static_cast<std::size_t>(trace.source_class)]
        << ',' << rec.probs[static_cast<std::size_t>(trace.config.target)] << ','
        << rec.gap_value << ',' << rec.distance_value << ',' << status << '\n';
  }
}

}  // namespace spikeadv
