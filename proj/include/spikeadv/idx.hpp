#pragma once

// Reader/writer for the MNIST idx file format.
//
// Layout (all integers big-endian):
//   images: magic 0x00000803, count, rows, cols, then count*rows*cols bytes
//   labels: magic 0x00000801, count, then count bytes
//
// Loaded pixel values are bytes 0..255; the declared image range is set
// accordingly and callers rescale to the range they need.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikeadv/image.hpp"

namespace spikeadv {

class IdxError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, bad_shape, truncated, count_mismatch, io };

  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw IdxError(IdxError::Kind::truncated, path + ": truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_be_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

// Loads an image/label file pair.  Throws IdxError with a distinct kind for
// a wrong magic number, a truncated payload, and an image/label count
// mismatch.  Pixel values come back as floats 0..255 with range (0, 255).
inline LabeledImageSet load_idx(const std::string& images_path, const std::string& labels_path,
                                LabeledImageSet::Split split) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IdxError(IdxError::Kind::io, images_path + ": cannot open");
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IdxError(IdxError::Kind::io, labels_path + ": cannot open");

  const std::uint32_t img_magic = detail::read_be_u32(imgs, images_path);
  if (img_magic != 0x803u)
    throw IdxError(IdxError::Kind::bad_magic, images_path + ": bad magic number");
  const std::uint32_t img_count = detail::read_be_u32(imgs, images_path);
  const std::uint32_t rows = detail::read_be_u32(imgs, images_path);
  const std::uint32_t cols = detail::read_be_u32(imgs, images_path);
  if (rows != Image::kRows || cols != Image::kCols)
    throw IdxError(IdxError::Kind::bad_shape, images_path + ": expected 28x28 images");

  const std::uint32_t lab_magic = detail::read_be_u32(labs, labels_path);
  if (lab_magic != 0x801u)
    throw IdxError(IdxError::Kind::bad_magic, labels_path + ": bad magic number");
  const std::uint32_t lab_count = detail::read_be_u32(labs, labels_path);
  if (img_count != lab_count)
    throw IdxError(IdxError::Kind::count_mismatch,
                   images_path + ": image count " + std::to_string(img_count) +
                       " != label count " + std::to_string(lab_count));

  LabeledImageSet set;
  set.split = split;
  set.images.resize(img_count);
  set.labels.resize(lab_count);

  std::vector<unsigned char> buf(static_cast<std::size_t>(Image::kPixels));
  for (std::uint32_t i = 0; i < img_count; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!imgs) throw IdxError(IdxError::Kind::truncated, images_path + ": truncated payload");
    Image& im = set.images[i];
    im.lo = 0.0f;
    im.hi = 255.0f;
    for (int p = 0; p < Image::kPixels; ++p) im.pixels[p] = static_cast<float>(buf[p]);
  }
  for (std::uint32_t i = 0; i < lab_count; ++i) {
    char c;
    labs.read(&c, 1);
    if (!labs) throw IdxError(IdxError::Kind::truncated, labels_path + ": truncated payload");
    const int label = static_cast<unsigned char>(c);
    if (label > 9)
      throw IdxError(IdxError::Kind::bad_shape, labels_path + ": label outside 0..9");
    set.labels[i] = label;
  }
  return set;
}

// Writes images in idx format.  Pixels are mapped from the declared range
// to bytes 0..255 (round-to-nearest), which is what downstream viewers and
// loaders expect.
inline void save_idx(const std::string& images_path, const std::string& labels_path,
                     const LabeledImageSet& set) {
  check_labels(set);
  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IdxError(IdxError::Kind::io, images_path + ": cannot open for write");
  std::ofstream labs(labels_path, std::ios::binary);
  if (!labs) throw IdxError(IdxError::Kind::io, labels_path + ": cannot open for write");

  detail::write_be_u32(imgs, 0x803u);
  detail::write_be_u32(imgs, static_cast<std::uint32_t>(set.size()));
  detail::write_be_u32(imgs, Image::kRows);
  detail::write_be_u32(imgs, Image::kCols);
  for (const auto& im : set.images) {
    const float span = im.hi - im.lo;
    unsigned char buf[Image::kPixels];
    for (int p = 0; p < Image::kPixels; ++p) {
      float unit = (im.pixels[p] - im.lo) / span;
      if (unit < 0.0f) unit = 0.0f;
      if (unit > 1.0f) unit = 1.0f;
      buf[p] = static_cast<unsigned char>(unit * 255.0f + 0.5f);
    }
    imgs.write(reinterpret_cast<const char*>(buf), Image::kPixels);
  }

  detail::write_be_u32(labs, 0x801u);
  detail::write_be_u32(labs, static_cast<std::uint32_t>(set.size()));
  for (int label : set.labels) {
    char c = static_cast<char>(label);
    labs.write(&c, 1);
  }
  if (!imgs || !labs) throw IdxError(IdxError::Kind::io, images_path + ": write failed");
}

// Standard MNIST file names inside a data directory.
struct MnistPaths {
  std::string train_images, train_labels, test_images, test_labels;
};

inline MnistPaths mnist_paths(const std::string& dir) {
  namespace fs = std::filesystem;
  auto join = [&](const char* name) { return (fs::path(dir) / name).string(); };
  return MnistPaths{join("train-images-idx3-ubyte"), join("train-labels-idx1-ubyte"),
                    join("t10k-images-idx3-ubyte"), join("t10k-labels-idx1-ubyte")};
}

inline LabeledImageSet load_mnist_split(const std::string& dir, LabeledImageSet::Split split) {
  const MnistPaths p = mnist_paths(dir);
  if (split == LabeledImageSet::Split::train)
    return load_idx(p.train_images, p.train_labels, split);
  return load_idx(p.test_images, p.test_labels, split);
}

}  // namespace spikeadv
