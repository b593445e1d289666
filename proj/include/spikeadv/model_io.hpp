#pragma once

// On-disk model container: an 8-byte magic, a little-endian u32 manifest
// length, a JSON manifest (format version, network kind, topology, neuron
// params, training provenance, seeds, tensor table), a payload of
// little-endian IEEE-754 binary32 values in manifest-declared tensor
// order (row-major within each tensor), and a trailing CRC-32 over
// everything before it.  Loading is all-or-nothing: every defect is
// reported as a typed error before any model object is produced, and
// float payloads round-trip bit-exactly, NaN patterns included.

#include <Eigen/Dense>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spikeadv/dnn.hpp"
#include "spikeadv/sdbn.hpp"

namespace spikeadv {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::array<char, 8> kModelMagic = {'s', 'p', 'k', 'a',
                                                    'd', 'v', 'm', 'l'};
// Guards manifest-driven allocation, far above any real model here.
inline constexpr std::uint64_t kMaxTensorElements = 1ull << 27;

enum class ModelIoErrorKind {
  io,                 // file cannot be opened, read or written
  bad_magic,          // not a model file
  version_mismatch,   // manifest format_version unsupported
  truncated,          // declared content extends past end of file
  checksum_mismatch,  // stored CRC-32 does not match the content
  structure,          // malformed manifest or manifest/payload disagreement
};

class ModelIoError : public std::runtime_error {
 public:
  ModelIoError(ModelIoErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ModelIoErrorKind kind() const { return kind_; }

 private:
  ModelIoErrorKind kind_;
};

// Kind-agnostic view of a model file.  Typed adapters below map it to and
// from the concrete network structs.
struct ModelFile {
  std::string kind;        // "dnn" or "sdbn"
  std::vector<int> topology;
  nlohmann::json neuron = nullptr;    // null for nets without rate units
  nlohmann::json training = nullptr;  // provenance echo, free-form
  nlohmann::json seeds = nullptr;     // provenance echo, free-form
  std::vector<std::pair<std::string, Eigen::MatrixXf>> tensors;  // payload order
};

namespace detail {

inline std::uint32_t crc32(const char* data, std::size_t n) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i)
    c = table[(c ^ static_cast<unsigned char>(data[i])) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFFu));
  out.push_back(static_cast<char>((v >> 8) & 0xFFu));
  out.push_back(static_cast<char>((v >> 16) & 0xFFu));
  out.push_back(static_cast<char>((v >> 24) & 0xFFu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t at) {
  const auto b = [&](std::size_t k) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + k]));
  };
  return b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
}

// `where` is the file path, or a short context for in-memory adapters.
[[noreturn]] inline void fail(ModelIoErrorKind kind, const std::string& where,
                              const std::string& what) {
  throw ModelIoError(kind, "model file (" + where + "): " + what);
}

struct TensorShape {
  std::string name;
  int rows = 0;
  int cols = 0;
};

// Manifest sanity independent of any network kind; throws structure.
inline std::vector<TensorShape> check_manifest(const nlohmann::json& m,
                                               const std::string& path) {
  for (const char* key :
       {"format_version", "kind", "topology", "neuron", "training", "seeds", "tensors"})
    if (!m.contains(key)) fail(ModelIoErrorKind::structure, path, std::string("manifest missing key '") + key + "'");
  std::vector<TensorShape> shapes;
  std::set<std::string> seen;
  try {
    for (const auto& jt : m.at("tensors")) {
      TensorShape s;
      s.name = jt.at("name").get<std::string>();
      s.rows = jt.at("rows").get<int>();
      s.cols = jt.at("cols").get<int>();
      if (s.name.empty() || !seen.insert(s.name).second)
        fail(ModelIoErrorKind::structure, path, "tensor names must be nonempty and unique");
      if (s.rows < 0 || s.cols < 0)
        fail(ModelIoErrorKind::structure, path, "negative tensor dimension");
      if (static_cast<std::uint64_t>(s.rows) * static_cast<std::uint64_t>(s.cols) >
          kMaxTensorElements)
        fail(ModelIoErrorKind::structure, path, "tensor '" + s.name + "' too large");
      shapes.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ModelIoErrorKind::structure, path, std::string("bad tensor table: ") + e.what());
  }
  return shapes;
}

}  // namespace detail

inline void write_model_file(const ModelFile& mf, const std::string& path) {
  if (mf.kind.empty()) throw std::invalid_argument("write_model_file: empty kind");
  nlohmann::json manifest;
  manifest["format_version"] = kModelFormatVersion;
  manifest["kind"] = mf.kind;
  manifest["topology"] = mf.topology;
  manifest["neuron"] = mf.neuron;
  manifest["training"] = mf.training;
  manifest["seeds"] = mf.seeds;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, mat] : mf.tensors)
    tensors.push_back({{"name", name},
                       {"rows", static_cast<int>(mat.rows())},
                       {"cols", static_cast<int>(mat.cols())}});
  manifest["tensors"] = std::move(tensors);
  const std::string mtext = manifest.dump();

  std::string buf;
  std::uint64_t elements = 0;
  for (const auto& [name, mat] : mf.tensors)
    elements += static_cast<std::uint64_t>(mat.size());
  buf.reserve(kModelMagic.size() + 4 + mtext.size() + elements * 4 + 4);
  buf.append(kModelMagic.data(), kModelMagic.size());
  detail::put_u32(buf, static_cast<std::uint32_t>(mtext.size()));
  buf += mtext;
  for (const auto& [name, mat] : mf.tensors)
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
      for (Eigen::Index c = 0; c < mat.cols(); ++c)
        detail::put_u32(buf, std::bit_cast<std::uint32_t>(mat(r, c)));
  detail::put_u32(buf, detail::crc32(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) detail::fail(ModelIoErrorKind::io, path, "cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) detail::fail(ModelIoErrorKind::io, path, "write failed");
}

inline ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::fail(ModelIoErrorKind::io, path, "cannot open for reading");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) detail::fail(ModelIoErrorKind::io, path, "read failed");

  const std::size_t header = kModelMagic.size() + 4;
  if (buf.size() < kModelMagic.size())
    detail::fail(ModelIoErrorKind::truncated, path, "shorter than the magic");
  if (!std::equal(kModelMagic.begin(), kModelMagic.end(), buf.begin()))
    detail::fail(ModelIoErrorKind::bad_magic, path, "magic bytes do not match");
  if (buf.size() < header)
    detail::fail(ModelIoErrorKind::truncated, path, "missing manifest length");
  const std::uint64_t mlen = detail::get_u32(buf, kModelMagic.size());
  // The 4 trailing bytes are the checksum; it must fit after the manifest.
  if (buf.size() < header + mlen + 4)
    detail::fail(ModelIoErrorKind::truncated, path, "manifest extends past end of file");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(buf.substr(header, mlen));
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ModelIoErrorKind::structure, path,
                 std::string("manifest is not valid JSON: ") + e.what());
  }
  // Version gate comes first: a newer file's manifest layout may legally
  // differ, so shape complaints about it would mislead.
  int version = -1;
  try {
    version = manifest.at("format_version").get<int>();
  } catch (const nlohmann::json::exception&) {
    detail::fail(ModelIoErrorKind::structure, path, "format_version missing or not an integer");
  }
  if (version != kModelFormatVersion)
    detail::fail(ModelIoErrorKind::version_mismatch, path,
                 "format version " + std::to_string(version) + ", expected " +
                     std::to_string(kModelFormatVersion));
  const auto shapes = detail::check_manifest(manifest, path);

  std::uint64_t elements = 0;
  for (const auto& s : shapes)
    elements += static_cast<std::uint64_t>(s.rows) * static_cast<std::uint64_t>(s.cols);
  const std::uint64_t expected = header + mlen + elements * 4 + 4;
  if (buf.size() < expected)
    detail::fail(ModelIoErrorKind::truncated, path, "payload extends past end of file");
  if (buf.size() > expected)
    detail::fail(ModelIoErrorKind::structure, path, "trailing bytes after the checksum");

  const std::uint32_t stored = detail::get_u32(buf, buf.size() - 4);
  if (detail::crc32(buf.data(), buf.size() - 4) != stored)
    detail::fail(ModelIoErrorKind::checksum_mismatch, path, "checksum does not match content");

  ModelFile mf;
  try {
    mf.kind = manifest.at("kind").get<std::string>();
    mf.topology = manifest.at("topology").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ModelIoErrorKind::structure, path, std::string("bad kind/topology: ") + e.what());
  }
  mf.neuron = manifest.at("neuron");
  mf.training = manifest.at("training");
  mf.seeds = manifest.at("seeds");

  std::size_t at = header + static_cast<std::size_t>(mlen);
  for (const auto& s : shapes) {
    Eigen::MatrixXf mat(s.rows, s.cols);
    for (int r = 0; r < s.rows; ++r)
      for (int c = 0; c < s.cols; ++c) {
        mat(r, c) = std::bit_cast<float>(detail::get_u32(buf, at));
        at += 4;
      }
    mf.tensors.emplace_back(s.name, std::move(mat));
  }
  return mf;
}

// Peeks the network kind so callers can dispatch without committing to a
// concrete loader.  Performs the full integrity checks.
inline std::string model_file_kind(const std::string& path) {
  return read_model_file(path).kind;
}

// ---- typed adapters ------------------------------------------------------

inline ModelFile to_model_file(const DnnModel& net,
                               nlohmann::json training = nullptr,
                               nlohmann::json seeds = nullptr) {
  if (net.layers.empty()) throw std::invalid_argument("to_model_file: empty network");
  ModelFile mf;
  mf.kind = "dnn";
  mf.topology = net.topology();
  mf.training = std::move(training);
  mf.seeds = std::move(seeds);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l) + ".";
    mf.tensors.emplace_back(base + "W", net.layers[l].W);
    mf.tensors.emplace_back(base + "b", Eigen::MatrixXf(net.layers[l].b));
  }
  return mf;
}

inline ModelFile to_model_file(const SdbnModel& model,
                               nlohmann::json training = nullptr,
                               nlohmann::json seeds = nullptr) {
  if (model.stack.empty()) throw std::invalid_argument("to_model_file: empty network");
  ModelFile mf;
  mf.kind = "sdbn";
  mf.topology = model.topology();
  mf.neuron = {{"tau_m", model.neuron.tau_m},
               {"t_ref", model.neuron.t_ref},
               {"v_th", model.neuron.v_th},
               {"v_reset", model.neuron.v_reset},
               {"r_max", model.neuron.r_max}};
  mf.training = std::move(training);
  mf.seeds = std::move(seeds);
  for (std::size_t l = 0; l < model.stack.size(); ++l) {
    const std::string base = "rbm" + std::to_string(l) + ".";
    mf.tensors.emplace_back(base + "W", model.stack[l].W);
    mf.tensors.emplace_back(base + "b_v", Eigen::MatrixXf(model.stack[l].b_v));
    mf.tensors.emplace_back(base + "b_h", Eigen::MatrixXf(model.stack[l].b_h));
  }
  return mf;
}

namespace detail {

// Pulls the next tensor off the file, insisting on its name and shape.
inline const Eigen::MatrixXf& take_tensor(const ModelFile& mf, std::size_t index,
                                          const std::string& name, int rows, int cols) {
  const std::string where = mf.kind + " adapter";
  if (index >= mf.tensors.size())
    fail(ModelIoErrorKind::structure, where, "missing tensor '" + name + "'");
  const auto& [tname, mat] = mf.tensors[index];
  if (tname != name)
    fail(ModelIoErrorKind::structure, where,
         "expected tensor '" + name + "', found '" + tname + "'");
  if (mat.rows() != rows || mat.cols() != cols)
    fail(ModelIoErrorKind::structure, where,
         "tensor '" + name + "' has shape " + std::to_string(mat.rows()) + "x" +
             std::to_string(mat.cols()) + ", expected " + std::to_string(rows) + "x" +
             std::to_string(cols));
  return mat;
}

}  // namespace detail

inline DnnModel dnn_from_model_file(const ModelFile& mf) {
  if (mf.kind != "dnn")
    detail::fail(ModelIoErrorKind::structure, mf.kind + " adapter", "not a dnn model file");
  if (mf.topology.size() < 2)
    detail::fail(ModelIoErrorKind::structure, mf.kind + " adapter", "topology needs at least two layers");
  const std::size_t layers = mf.topology.size() - 1;
  if (mf.tensors.size() != 2 * layers)
    detail::fail(ModelIoErrorKind::structure, mf.kind + " adapter", "tensor count does not match topology");
  DnnModel net;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string base = "layer" + std::to_string(l) + ".";
    const int in = mf.topology[l], out = mf.topology[l + 1];
    DnnModel::Layer layer;
    layer.W = detail::take_tensor(mf, 2 * l, base + "W", in, out);
    layer.b = detail::take_tensor(mf, 2 * l + 1, base + "b", out, 1);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline SdbnModel sdbn_from_model_file(const ModelFile& mf) {
  if (mf.kind != "sdbn")
    detail::fail(ModelIoErrorKind::structure, mf.kind + " adapter", "not an sdbn model file");
  if (mf.topology.size() < 2)
    detail::fail(ModelIoErrorKind::structure, mf.kind + " adapter", "topology needs at least two layers");
  const std::size_t layers = mf.topology.size() - 1;
  if (mf.tensors.size() != 3 * layers)
    detail::fail(ModelIoErrorKind::structure, mf.kind + " adapter", "tensor count does not match topology");
  SdbnModel model;
  try {
    model.neuron.tau_m = mf.neuron.at("tau_m").get<double>();
    model.neuron.t_ref = mf.neuron.at("t_ref").get<double>();
    model.neuron.v_th = mf.neuron.at("v_th").get<double>();
    model.neuron.v_reset = mf.neuron.at("v_reset").get<double>();
    model.neuron.r_max = mf.neuron.at("r_max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ModelIoErrorKind::structure, mf.kind + " adapter",
                 std::string("bad neuron params: ") + e.what());
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string base = "rbm" + std::to_string(l) + ".";
    const int vis = mf.topology[l], hid = mf.topology[l + 1];
    Rbm rbm;
    rbm.W = detail::take_tensor(mf, 3 * l, base + "W", vis, hid);
    rbm.b_v = detail::take_tensor(mf, 3 * l + 1, base + "b_v", vis, 1);
    rbm.b_h = detail::take_tensor(mf, 3 * l + 2, base + "b_h", hid, 1);
    model.stack.push_back(std::move(rbm));
  }
  return model;
}

inline void save_model(const DnnModel& net, const std::string& path,
                       nlohmann::json training = nullptr, nlohmann::json seeds = nullptr) {
  write_model_file(to_model_file(net, std::move(training), std::move(seeds)), path);
}

inline void save_model(const SdbnModel& model, const std::string& path,
                       nlohmann::json training = nullptr, nlohmann::json seeds = nullptr) {
  write_model_file(to_model_file(model, std::move(training), std::move(seeds)), path);
}

inline DnnModel load_dnn(const std::string& path) {
  return dnn_from_model_file(read_model_file(path));
}

inline SdbnModel load_sdbn(const std::string& path) {
  return sdbn_from_model_file(read_model_file(path));
}

}  // namespace spikeadv
