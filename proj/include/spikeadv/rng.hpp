#pragma once

// Deterministic random numbers with explicit substream forking.
//
// All stochastic code in this library draws from Rng instead of the
// <random> distribution classes: the standard distributions are
// implementation-defined, so seeded runs would not reproduce across
// standard libraries.  Rng pins the full pipeline (mt19937_64 engine,
// bit-to-double conversion, Box-Muller) and therefore yields identical
// streams on any conforming platform.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace spikeadv {

// splitmix64 finalizer; used to spread user seeds and derive substreams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed of substream `id` of a base seed.  Forked streams are used for
// per-image noise, per-pixel spike trains and per-run repeats, so that
// changing how many streams a caller consumes never shifts the others.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id) {
  return splitmix64(splitmix64(base) ^ splitmix64(id + 0x632be59bd9b4e019ull));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static Rng stream(std::uint64_t base, std::uint64_t id) {
    Rng r(0);
    r.engine_.seed(derive_seed(base, id));
    return r;
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; the second deviate of each pair is cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 1.0 - uniform01();  // (0,1], keeps log finite
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exponential inter-event time for a Poisson process of the given rate.
  double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

  // Uniform integer in [0, n); rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Fisher-Yates; std::shuffle is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace spikeadv
