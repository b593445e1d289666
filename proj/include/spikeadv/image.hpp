#pragma once

// Core image containers shared by every module: a fixed 28x28 grayscale
// image with an explicit declared intensity range, a labeled set of them,
// and a rectangular window into the pixel grid.

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace spikeadv {

struct Image {
  static constexpr int kRows = 28;
  static constexpr int kCols = 28;
  static constexpr int kPixels = kRows * kCols;

  std::array<float, kPixels> pixels{};  // row-major
  // Declared intensity range; pixel values must lie inside it.
  float lo = 0.0f;
  float hi = 1.0f;

  float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * kCols + col]; }
  float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * kCols + col]; }
};

// Rectangular pixel region: rows [row0, row0+height), cols [col0, col0+width).
struct Window {
  int row0 = 0;
  int col0 = 0;
  int height = 0;
  int width = 0;

  int size() const { return height * width; }
  bool contains(int row, int col) const {
    return row >= row0 && row < row0 + height && col >= col0 && col < col0 + width;
  }
  bool inside_grid() const {
    return row0 >= 0 && col0 >= 0 && height > 0 && width > 0 &&
           row0 + height <= Image::kRows && col0 + width <= Image::kCols;
  }
};

inline Window full_window() { return Window{0, 0, Image::kRows, Image::kCols}; }

struct LabeledImageSet {
  enum class Split { train, test };

  std::vector<Image> images;
  std::vector<int> labels;  // each in 0..9, aligned with images
  Split split = Split::train;

  std::size_t size() const { return images.size(); }
};

inline void check_labels(const LabeledImageSet& set) {
  if (set.images.size() != set.labels.size())
    throw std::invalid_argument("image/label count mismatch");
  for (int label : set.labels)
    if (label < 0 || label > 9) throw std::invalid_argument("label outside 0..9");
}

// Affine map of the declared range onto [new_lo, new_hi].  The range
// endpoints map exactly onto the new endpoints; interior values follow
// linearly.  Pixels equal to an endpoint stay exactly on it, so repeated
// rescaling cannot leak values outside the declared range.
inline Image rescale(const Image& img, float new_lo, float new_hi) {
  if (!(new_lo < new_hi)) throw std::invalid_argument("rescale: empty target range");
  Image out = img;
  const float scale = (new_hi - new_lo) / (img.hi - img.lo);
  for (auto& p : out.pixels) p = new_lo + (p - img.lo) * scale;
  out.lo = new_lo;
  out.hi = new_hi;
  return out;
}

inline LabeledImageSet rescale(const LabeledImageSet& set, float new_lo, float new_hi) {
  LabeledImageSet out;
  out.labels = set.labels;
  out.split = set.split;
  out.images.reserve(set.images.size());
  for (const auto& img : set.images) out.images.push_back(rescale(img, new_lo, new_hi));
  return out;
}

}  // namespace spikeadv
