#pragma once

// Conventional feed-forward classifier: logistic hidden layers, softmax
// output, trained with seeded minibatch SGD plus momentum.  Serves as the
// non-spiking baseline and as a black-box attack target.
//
// The net is templated on the scalar type: production code uses float,
// the gradient correctness tests instantiate the same code with double so
// finite differences are meaningful.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "spikeadv/classify.hpp"
#include "spikeadv/image.hpp"
#include "spikeadv/rng.hpp"

namespace spikeadv {

template <typename Scalar>
struct DenseNet {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix W;  // in x out
    Vector b;  // out
  };

  std::vector<Layer> layers;

  std::vector<int> topology() const {
    std::vector<int> t;
    if (layers.empty()) return t;
    t.push_back(static_cast<int>(layers.front().W.rows()));
    for (const auto& l : layers) t.push_back(static_cast<int>(l.W.cols()));
    return t;
  }
};

using DnnModel = DenseNet<float>;

inline const std::vector<int>& dnn_default_topology() {
  static const std::vector<int> t{Image::kPixels, 500, 500, kClasses};
  return t;
}

struct DnnTrainConfig {
  std::vector<int> topology = dnn_default_topology();
  int epochs = 30;
  int minibatch = 100;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double lr_decay = 1.0;  // multiplicative, applied after each epoch
  double validation_fraction = 0.0;
  std::uint64_t seed = 1;
};

namespace detail {

template <typename Scalar>
Scalar logistic(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

}  // namespace detail

// Weights ~ N(0, 1/sqrt(fan_in)), biases zero.  Draw order is fixed
// (layers in order, W entries row-major), so one seed pins every weight.
template <typename Scalar = float>
DenseNet<Scalar> dnn_init(const std::vector<int>& topology, std::uint64_t seed) {
  if (topology.size() < 2) throw std::invalid_argument("dnn_init: topology needs >= 2 layers");
  for (int n : topology)
    if (n <= 0) throw std::invalid_argument("dnn_init: non-positive layer size");
  DenseNet<Scalar> net;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < topology.size(); ++l) {
    typename DenseNet<Scalar>::Layer layer;
    const int in = topology[l], out = topology[l + 1];
    layer.W.resize(in, out);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
    for (int r = 0; r < in; ++r)
      for (int c = 0; c < out; ++c) layer.W(r, c) = static_cast<Scalar>(rng.normal(0.0, stddev));
    layer.b = DenseNet<Scalar>::Vector::Zero(out);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

// Batched forward pass.  Rows of X are samples; returns per-layer hidden
// activations plus softmax probabilities (computed in double for a stable,
// exactly normalized distribution).
template <typename Scalar>
struct DnnForward {
  std::vector<typename DenseNet<Scalar>::Matrix> hidden;  // activations per hidden layer
  Eigen::MatrixXd probs;                                  // batch x classes
};

template <typename Scalar>
DnnForward<Scalar> dnn_forward_batch(const DenseNet<Scalar>& net,
                                     const typename DenseNet<Scalar>::Matrix& X) {
  using Matrix = typename DenseNet<Scalar>::Matrix;
  DnnForward<Scalar> fwd;
  Matrix act = X;
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    Matrix z = act * net.layers[l].W;
    z.rowwise() += net.layers[l].b.transpose();
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = detail::logistic(z(i));
    fwd.hidden.push_back(std::move(z));
    act = fwd.hidden.back();
  }
  Matrix logits = act * net.layers.back().W;
  logits.rowwise() += net.layers.back().b.transpose();
  if (!logits.allFinite())
    throw std::runtime_error("dnn forward: non-finite activation");

  fwd.probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = -1e300;
    for (Eigen::Index c = 0; c < logits.cols(); ++c)
      mx = std::max(mx, static_cast<double>(logits(r, c)));
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double e = std::exp(static_cast<double>(logits(r, c)) - mx);
      fwd.probs(r, c) = e;
      sum += e;
    }
    fwd.probs.row(r) /= sum;
  }
  return fwd;
}

template <typename Scalar>
ProbabilityVector dnn_forward(const DenseNet<Scalar>& net, const Image& img) {
  typename DenseNet<Scalar>::Matrix X(1, Image::kPixels);
  for (int i = 0; i < Image::kPixels; ++i) X(0, i) = static_cast<Scalar>(img.pixels[i]);
  const auto fwd = dnn_forward_batch(net, X);
  ProbabilityVector p{};
  for (int c = 0; c < kClasses; ++c) p[c] = fwd.probs(0, c);
  return p;
}

// Mean cross-entropy loss and its gradients for one minibatch.
template <typename Scalar>
struct DnnGrads {
  double loss = 0.0;
  std::vector<typename DenseNet<Scalar>::Matrix> gW;
  std::vector<typename DenseNet<Scalar>::Vector> gb;
};

template <typename Scalar>
DnnGrads<Scalar> dnn_backprop(const DenseNet<Scalar>& net,
                              const typename DenseNet<Scalar>::Matrix& X,
                              const std::vector<int>& targets) {
  using Matrix = typename DenseNet<Scalar>::Matrix;
  const Eigen::Index B = X.rows();
  if (static_cast<std::size_t>(B) != targets.size())
    throw std::invalid_argument("dnn_backprop: batch/target size mismatch");

  const auto fwd = dnn_forward_batch(net, X);

  DnnGrads<Scalar> g;
  g.gW.resize(net.layers.size());
  g.gb.resize(net.layers.size());

  for (Eigen::Index r = 0; r < B; ++r)
    g.loss -= std::log(std::max(fwd.probs(r, targets[r]), 1e-300));
  g.loss /= static_cast<double>(B);

  // dL/dlogits = (softmax - onehot) / B
  Matrix delta(B, kClasses);
  for (Eigen::Index r = 0; r < B; ++r)
    for (int c = 0; c < kClasses; ++c)
      delta(r, c) = static_cast<Scalar>((fwd.probs(r, c) - (targets[r] == c ? 1.0 : 0.0)) /
                                        static_cast<double>(B));

  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const Matrix& input = l == 0 ? X : fwd.hidden[l - 1];
    g.gW[l] = input.transpose() * delta;
    g.gb[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * net.layers[l].W.transpose();
      const Matrix& h = fwd.hidden[l - 1];
      delta = back.array() * h.array() * (Scalar(1) - h.array());
    }
  }
  return g;
}

// Minibatch SGD with momentum.  Deterministic for a fixed config: the
// seed pins initialization and every epoch's shuffle.  Throws if the loss
// stops being finite, naming the epoch.
template <typename Scalar = float>
DenseNet<Scalar> dnn_train(const LabeledImageSet& data, const DnnTrainConfig& cfg,
                           std::ostream* log = nullptr) {
  check_labels(data);
  if (cfg.epochs < 0 || cfg.minibatch <= 0)
    throw std::invalid_argument("dnn_train: bad epochs/minibatch");
  if (cfg.topology.front() != Image::kPixels || cfg.topology.back() != kClasses)
    throw std::invalid_argument("dnn_train: topology must map pixels to classes");

  using Matrix = typename DenseNet<Scalar>::Matrix;
  DenseNet<Scalar> net = dnn_init<Scalar>(cfg.topology, cfg.seed);
  if (cfg.epochs == 0 || data.size() == 0) return net;

  const std::size_t n_val =
      static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(data.size()));
  const std::size_t n_train = data.size() - n_val;
  if (n_train == 0) throw std::invalid_argument("dnn_train: empty training split");

  Matrix X(n_train, Image::kPixels);
  std::vector<int> y(n_train);
  for (std::size_t i = 0; i < n_train; ++i) {
    for (int p = 0; p < Image::kPixels; ++p) X(i, p) = static_cast<Scalar>(data.images[i].pixels[p]);
    y[i] = data.labels[i];
  }

  std::vector<typename DenseNet<Scalar>::Matrix> vW;
  std::vector<typename DenseNet<Scalar>::Vector> vb;
  for (const auto& l : net.layers) {
    vW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
    vb.push_back(DenseNet<Scalar>::Vector::Zero(l.b.size()));
  }

  Rng shuffle_rng = Rng::stream(cfg.seed, 0x5351);
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_train; start += cfg.minibatch) {
      const std::size_t bs = std::min<std::size_t>(cfg.minibatch, n_train - start);
      Matrix Xb(bs, Image::kPixels);
      std::vector<int> yb(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        Xb.row(i) = X.row(order[start + i]);
        yb[i] = y[order[start + i]];
      }
      auto g = dnn_backprop(net, Xb, yb);
      if (!std::isfinite(g.loss)) {
        std::ostringstream msg;
        msg << "dnn_train: loss diverged at epoch " << epoch;
        throw std::runtime_error(msg.str());
      }
      epoch_loss += g.loss;
      ++batches;
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        vW[l] = Scalar(cfg.momentum) * vW[l] - Scalar(lr) * g.gW[l];
        vb[l] = Scalar(cfg.momentum) * vb[l] - Scalar(lr) * g.gb[l];
        net.layers[l].W += vW[l];
        net.layers[l].b += vb[l];
      }
    }
    if (log)
      *log << "epoch " << epoch << " mean loss " << epoch_loss / static_cast<double>(batches)
           << "\n";
    lr *= cfg.lr_decay;
  }
  return net;
}

// Fraction of images whose argmax probability matches the label.
template <typename Scalar>
double dnn_evaluate(const DenseNet<Scalar>& net, const LabeledImageSet& set) {
  check_labels(set);
  if (set.size() == 0) throw std::invalid_argument("dnn_evaluate: empty set");
  using Matrix = typename DenseNet<Scalar>::Matrix;
  const std::size_t chunk = 512;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < set.size(); start += chunk) {
    const std::size_t bs = std::min(chunk, set.size() - start);
    Matrix X(bs, Image::kPixels);
    for (std::size_t i = 0; i < bs; ++i)
      for (int p = 0; p < Image::kPixels; ++p)
        X(i, p) = static_cast<Scalar>(set.images[start + i].pixels[p]);
    const auto fwd = dnn_forward_batch(net, X);
    for (std::size_t i = 0; i < bs; ++i) {
      ProbabilityVector pv{};
      for (int c = 0; c < kClasses; ++c) pv[c] = fwd.probs(i, c);
      if (argmax(pv) == set.labels[start + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

// Black-box view of a model.  The oracle owns a copy, so later mutation
// of the caller's model cannot change answers mid-attack.
template <typename Scalar>
Oracle dnn_oracle(const DenseNet<Scalar>& net) {
  return [model = net](const Image& img) { return dnn_forward(model, img); };
}

}  // namespace spikeadv
