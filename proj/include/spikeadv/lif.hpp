#pragma once

// Spike-level evaluation of an SdbnModel: Poisson encoding of pixels and a
// clock-driven leaky integrate-and-fire simulation of the full stack.
//
// Dynamics per step dt (forward Euler):
//   V += dt/tau_m * (-V) + dt * bias + sum of presynaptic weights that
//        spiked this step
// A step integrates the window [t, t+dt), so a crossing fires at t+dt.
// The spike is delivered to the next layer within the same step; the
// neuron resets to v_reset and ignores all input for t_ref from the
// firing time (steps overlapping the refractory window are dropped
// whole, a dt-resolution approximation).
// Classification probabilities are per-class shares of output spike
// counts, averaged over cfg.repeats independent runs; a run without any
// output spike contributes the uniform distribution and sets a flag.
//
// Every run is deterministic in cfg.seed: run r forks substream r, and
// pixel k of run r forks substream k of that.

#include <array>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "spikeadv/classify.hpp"
#include "spikeadv/image.hpp"
#include "spikeadv/rng.hpp"
#include "spikeadv/sdbn.hpp"

namespace spikeadv {

struct SpikeTrain {
  std::vector<double> times;  // strictly increasing, within [0, duration)
};

struct SimConfig {
  double duration = 1.0;  // seconds
  double dt = 1e-3;       // seconds
  int repeats = 3;
  std::uint64_t seed = 0;
  bool record_trace = false;
};

struct SpikeEvent {
  double time;
  int layer;  // 0 = input channels, 1..3 = network layers
  int neuron;
};

struct SpikeForwardResult {
  ProbabilityVector probabilities{};
  std::array<long, kClasses> spike_counts{};  // summed over repeats
  bool silent_run = false;                    // some run had no output spikes
  std::vector<SpikeEvent> events;             // filled when record_trace
};

// Homogeneous Poisson spike trains for an image interpreted as rate
// fractions: pixel value v (within its declared range, at most 1) drives
// the channel at v * r_max.  Pixel k uses substream k of seed.
inline std::vector<SpikeTrain> poisson_encode(const Image& img, const NeuronParams& np,
                                              double duration, std::uint64_t seed) {
  if (duration <= 0.0) throw std::invalid_argument("poisson_encode: non-positive duration");
  std::vector<SpikeTrain> trains(Image::kPixels);
  for (int k = 0; k < Image::kPixels; ++k) {
    const double v = img.pixels[k];
    if (v < img.lo - 1e-6f || v > img.hi + 1e-6f)
      throw std::invalid_argument("poisson_encode: pixel outside declared range");
    const double rate = v * np.r_max;
    if (rate <= 0.0) continue;
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(k));
    double t = rng.exponential(rate);
    while (t < duration) {
      trains[k].times.push_back(t);
      t += rng.exponential(rate);
    }
  }
  return trains;
}

// One spike-level classification.  The image must be in declared range
// (0,1); the encoding boundary applies the same 0.2 scaling as the rate
// path, capping input rates at 0.2 * r_max.
inline SpikeForwardResult sdbn_spike_forward(const SdbnModel& model, const Image& img,
                                             const SimConfig& cfg) {
  if (model.stack.size() != 3) throw std::invalid_argument("sdbn: expected 3 layers");
  if (img.lo != 0.0f || img.hi != 1.0f)
    throw std::invalid_argument("sdbn_spike_forward: image must be in declared range (0,1)");
  if (cfg.duration <= 0.0 || cfg.dt <= 0.0 || cfg.repeats <= 0)
    throw std::invalid_argument("sdbn_spike_forward: bad sim config");

  const NeuronParams& np = model.neuron;
  const long steps = static_cast<long>(cfg.duration / cfg.dt);
  const Image scaled = rescale(img, 0.0f, static_cast<float>(kInputScale));

  SpikeForwardResult result;
  std::array<double, kClasses> mean_probs{};

  const int n_layers = 3;
  std::array<int, 3> sizes{};
  // Transposed weights: column j holds neuron j's outgoing row, contiguous.
  std::array<Eigen::MatrixXf, 3> WT;
  for (int l = 0; l < n_layers; ++l) {
    sizes[l] = model.stack[l].hidden();
    WT[l] = model.stack[l].W.transpose();
  }

  for (int run = 0; run < cfg.repeats; ++run) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
    const auto trains = poisson_encode(scaled, np, cfg.duration, run_seed);

    // Next-spike cursor per input channel.
    std::vector<std::size_t> cursor(Image::kPixels, 0);

    std::array<std::vector<double>, 3> V;
    std::array<std::vector<double>, 3> ref_until;
    std::array<Eigen::VectorXf, 3> syn;
    for (int l = 0; l < n_layers; ++l) {
      V[l].assign(sizes[l], np.v_reset);
      ref_until[l].assign(sizes[l], -1.0);
      syn[l] = Eigen::VectorXf::Zero(sizes[l]);
    }
    std::array<long, kClasses> counts{};

    for (long step = 0; step < steps; ++step) {
      const double t = static_cast<double>(step) * cfg.dt;
      for (int l = 0; l < n_layers; ++l) syn[l].setZero();

      // Input spikes due in [t, t+dt) go into layer 1.
      for (int k = 0; k < Image::kPixels; ++k) {
        const auto& times = trains[k].times;
        while (cursor[k] < times.size() && times[cursor[k]] < t + cfg.dt) {
          if (cfg.record_trace) result.events.push_back({times[cursor[k]], 0, k});
          syn[0] += WT[0].col(k);
          ++cursor[k];
        }
      }

      for (int l = 0; l < n_layers; ++l) {
        const auto& bias = model.stack[l].b_h;
        for (int j = 0; j < sizes[l]; ++j) {
          if (t < ref_until[l][j]) continue;  // refractory: inputs dropped
          double v = V[l][j];
          v += cfg.dt / np.tau_m * (-v) + cfg.dt * static_cast<double>(bias(j)) +
               static_cast<double>(syn[l](j));
          if (v >= np.v_th) {
            if (cfg.record_trace) result.events.push_back({t + cfg.dt, l + 1, j});
            v = np.v_reset;
            ref_until[l][j] = t + cfg.dt + np.t_ref;
            if (l + 1 < n_layers)
              syn[l + 1] += WT[l + 1].col(j);
            else
              ++counts[j];
          }
          V[l][j] = v;
        }
      }
    }

    long total = 0;
    for (int c = 0; c < kClasses; ++c) {
      total += counts[c];
      result.spike_counts[c] += counts[c];
    }
    if (total == 0) {
      result.silent_run = true;
      for (int c = 0; c < kClasses; ++c) mean_probs[c] += 1.0 / kClasses;
    } else {
      for (int c = 0; c < kClasses; ++c)
        mean_probs[c] += static_cast<double>(counts[c]) / static_cast<double>(total);
    }
  }

  for (int c = 0; c < kClasses; ++c)
    result.probabilities[c] = mean_probs[c] / static_cast<double>(cfg.repeats);
  return result;
}

// Spiking black box; probabilities averaged over cfg.repeats runs.  Each
// query q uses substream q of cfg.seed, so a full attack is reproducible.
inline Oracle sdbn_spiking_oracle(const SdbnModel& model, const SimConfig& cfg) {
  auto shared = std::make_shared<const SdbnModel>(model);
  auto counter = std::make_shared<std::uint64_t>(0);
  return [shared, cfg, counter](const Image& img) {
    SimConfig per_query = cfg;
    per_query.seed = derive_seed(cfg.seed, (*counter)++);
    per_query.record_trace = false;
    return sdbn_spike_forward(*shared, img, per_query).probabilities;
  };
}

// CSV export of a recorded spike trace.
inline void spike_trace_csv(const SpikeForwardResult& result, std::ostream& out) {
  out << "time,layer,neuron,spike\n";
  for (const auto& e : result.events)
    out << e.time << ',' << e.layer << ',' << e.neuron << ",1\n";
}

}  // namespace spikeadv
