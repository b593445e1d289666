#pragma once

// Random pixel noise of configurable magnitude, distribution and region,
// used for the robustness sweeps.  Noise is additive and the result is
// clamped back into the image's declared range:
//
//   p' = clamp(p + magnitude * z,  lo, hi)
//
// with z ~ N(0,1) or z ~ U(-1,1) drawn per pixel.  Applying the same spec
// to the same image twice is bit-identical: each call runs a fresh engine
// seeded from spec.seed and visits the region pixels in row-major order.

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "spikeadv/image.hpp"
#include "spikeadv/rng.hpp"

namespace spikeadv {

struct NoiseSpec {
  enum class Dist { normal, uniform };

  Dist dist = Dist::normal;
  double magnitude = 0.0;
  // Absent region means the whole image.
  std::optional<Window> region;
  std::uint64_t seed = 0;
};

inline Image apply_noise(const Image& img, const NoiseSpec& spec) {
  const Window w = spec.region.value_or(full_window());
  if (!w.inside_grid()) throw std::invalid_argument("apply_noise: region outside 28x28 grid");
  if (spec.magnitude < 0.0) throw std::invalid_argument("apply_noise: negative magnitude");

  Image out = img;
  Rng rng(spec.seed);
  for (int r = w.row0; r < w.row0 + w.height; ++r) {
    for (int c = w.col0; c < w.col0 + w.width; ++c) {
      const double z =
          spec.dist == NoiseSpec::Dist::normal ? rng.normal() : rng.uniform(-1.0, 1.0);
      double p = out.at(r, c) + spec.magnitude * z;
      if (p < img.lo) p = img.lo;
      if (p > img.hi) p = img.hi;
      out.at(r, c) = static_cast<float>(p);
    }
  }
  return out;
}

// Noise over a whole set.  Image i uses substream i of base_seed, so the
// per-image noise is independent of the set size and of processing order.
inline LabeledImageSet apply_noise(const LabeledImageSet& set, NoiseSpec spec,
                                   std::uint64_t base_seed) {
  LabeledImageSet out;
  out.labels = set.labels;
  out.split = set.split;
  out.images.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    spec.seed = derive_seed(base_seed, i);
    out.images.push_back(apply_noise(set.images[i], spec));
  }
  return out;
}

}  // namespace spikeadv
