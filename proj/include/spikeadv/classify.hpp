#pragma once

// Classifier-facing vocabulary: a 10-class probability vector, the
// black-box oracle signature, and argmax with a fixed tie rule.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>

#include "spikeadv/image.hpp"

namespace spikeadv {

inline constexpr int kClasses = 10;

using ProbabilityVector = std::array<double, kClasses>;

// A black-box classifier: image in, class probabilities out.  Attack code
// sees nothing else of the model.
using Oracle = std::function<ProbabilityVector(const Image&)>;

// Ties resolve to the lowest class index, so argmax is total and
// evaluation results are reproducible bit-for-bit.
inline int argmax(const ProbabilityVector& p) {
  int best = 0;
  for (int c = 1; c < kClasses; ++c)
    if (p[c] > p[best]) best = c;
  return best;
}

// Wraps an oracle and counts queries; used to audit query budgets.
class CountingOracle {
 public:
  explicit CountingOracle(Oracle inner)
      : inner_(std::move(inner)), count_(std::make_shared<std::uint64_t>(0)) {}

  ProbabilityVector operator()(const Image& img) const {
    ++*count_;
    return inner_(img);
  }

  std::uint64_t count() const { return *count_; }
  void reset() { *count_ = 0; }

 private:
  Oracle inner_;
  std::shared_ptr<std::uint64_t> count_;
};

}  // namespace spikeadv
