#pragma once

// Spiking deep belief network, 784-500-500-10.
//
// The two hidden layers are trained unsupervised as rate-unit RBMs
// (rbm.hpp).  The top 500->10 layer is trained supervised by gradient
// descent on the cross-entropy of the normalized output rates, with the
// lower layers frozen.
//
// Images enter the network on a scaled-down intensity band: a pixel p in
// (0,1) drives its input channel at p * 0.2 * r_max (at most 100 Hz), the
// same convention the spiking simulator uses.  All rate propagation in
// this header evaluates the exact quadrature-based rate, never the
// training lookup table.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "spikeadv/classify.hpp"
#include "spikeadv/image.hpp"
#include "spikeadv/rbm.hpp"
#include "spikeadv/rng.hpp"
#include "spikeadv/siegert.hpp"

namespace spikeadv {

inline constexpr double kInputScale = 0.2;  // fraction of r_max a full pixel drives

struct SdbnModel {
  std::vector<Rbm> stack;  // 784-500, 500-500, 500-10; top b_v unused
  NeuronParams neuron;

  std::vector<int> topology() const {
    std::vector<int> t;
    if (stack.empty()) return t;
    t.push_back(stack.front().visible());
    for (const auto& r : stack) t.push_back(r.hidden());
    return t;
  }
};

struct SdbnTopConfig {
  int epochs = 40;
  int minibatch = 100;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_init_std = 0.02;
  double bias_init = 75.0;  // initial bias drive [Hz]; see RbmTrainConfig
  std::uint64_t seed = 3;
};

struct SdbnTrainConfig {
  int hidden1 = 500;
  int hidden2 = 500;
  RbmTrainConfig layer1;
  RbmTrainConfig layer2;
  SdbnTopConfig top;
  NeuronParams neuron;
  std::size_t train_subset = 0;  // 0 = use the full dataset
};

namespace detail {

inline void check_unit_range(const LabeledImageSet& data, const char* who) {
  for (const auto& img : data.images)
    if (img.lo != 0.0f || img.hi != 1.0f)
      throw std::invalid_argument(std::string(who) + ": images must be in declared range (0,1)");
}

// Exact (quadrature) rates of one rate-unit layer.  Input rates lambda in
// Hz, rows are samples; returns rates in Hz.
inline Eigen::MatrixXf layer_rates_exact(const Eigen::MatrixXf& lambda, const Rbm& rbm,
                                         const NeuronParams& np) {
  const Eigen::MatrixXf W2 = rbm.W.cwiseProduct(rbm.W);
  Eigen::MatrixXf drive = lambda * rbm.W;
  drive.rowwise() += rbm.b_h.transpose();
  const Eigen::MatrixXf var = lambda * W2;
  Eigen::MatrixXf rates(drive.rows(), drive.cols());
  for (Eigen::Index r = 0; r < drive.rows(); ++r)
    for (Eigen::Index c = 0; c < drive.cols(); ++c) {
      const double mu = np.tau_m * static_cast<double>(drive(r, c));
      const double s2 = 0.5 * np.tau_m * static_cast<double>(var(r, c));
      rates(r, c) = static_cast<float>(siegert_rate_stats(mu, s2, np));
    }
  return rates;
}

inline Eigen::MatrixXf images_to_matrix(const LabeledImageSet& data, std::size_t count) {
  Eigen::MatrixXf X(count, Image::kPixels);
  for (std::size_t i = 0; i < count; ++i)
    for (int p = 0; p < Image::kPixels; ++p) X(i, p) = data.images[i].pixels[p];
  return X;
}

}  // namespace detail

// Supervised trainer for the top rate-unit layer.  Inputs are the frozen
// second-layer activation probabilities; rates are table-evaluated but all
// partial derivatives are analytic (siegert_rate_grad).  The loss is the
// cross-entropy of the rate distribution q = r / sum(r), with a tiny
// epsilon guard so silent output layers cannot produce infinities.
inline void sdbn_train_top(Rbm& top, const Eigen::MatrixXf& h2_probs,
                           const std::vector<int>& labels, const SdbnTopConfig& cfg,
                           const NeuronParams& np, std::ostream* log = nullptr) {
  const Eigen::Index n = h2_probs.rows();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("sdbn_train_top: data/label mismatch");
  const auto table = SiegertTable::shared(np);
  const int in = top.visible(), out = top.hidden();
  const float r_max = static_cast<float>(np.r_max);

  Eigen::MatrixXf vW = Eigen::MatrixXf::Zero(in, out);
  Eigen::VectorXf vb = Eigen::VectorXf::Zero(out);
  Rng shuffle_rng = Rng::stream(cfg.seed, 0x5351);
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;

  const double eps = 1e-9 * np.r_max;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    Eigen::Index batches = 0;
    for (Eigen::Index start = 0; start < n; start += cfg.minibatch) {
      const Eigen::Index bs = std::min<Eigen::Index>(cfg.minibatch, n - start);
      Eigen::MatrixXf lambda(bs, in);
      std::vector<int> y(bs);
      for (Eigen::Index i = 0; i < bs; ++i) {
        lambda.row(i) = h2_probs.row(order[start + i]) * r_max;
        y[i] = labels[order[start + i]];
      }
      const Eigen::MatrixXf W2 = top.W.cwiseProduct(top.W);
      Eigen::MatrixXf drive = lambda * top.W;
      drive.rowwise() += top.b_h.transpose();
      const Eigen::MatrixXf var = lambda * W2;

      // dL/ddrive and dL/dvarsum per unit; chain through mu = tau*drive,
      // sigma2 = tau/2 * varsum.
      Eigen::MatrixXf g_drive(bs, out), g_var(bs, out);
      for (Eigen::Index i = 0; i < bs; ++i) {
        double rates[kClasses] = {};
        SiegertGrad grads[kClasses] = {};
        double sum = 0.0;
        for (int c = 0; c < out; ++c) {
          const double mu = np.tau_m * static_cast<double>(drive(i, c));
          const double s2 = 0.5 * np.tau_m * static_cast<double>(var(i, c));
          grads[c] = siegert_rate_grad(mu, s2, np);
          rates[c] = grads[c].rate;
          sum += rates[c] + eps;
        }
        loss_sum -= std::log((rates[y[i]] + eps) / sum);
        for (int c = 0; c < out; ++c) {
          const double dl_dr = 1.0 / sum - (c == y[i] ? 1.0 / (rates[c] + eps) : 0.0);
          g_drive(i, c) = static_cast<float>(dl_dr * grads[c].d_mu * np.tau_m);
          g_var(i, c) = static_cast<float>(dl_dr * grads[c].d_sigma2 * 0.5 * np.tau_m);
        }
      }
      const float inv_b = 1.0f / static_cast<float>(bs);
      Eigen::MatrixXf grad_W = lambda.transpose() * g_drive * inv_b;
      grad_W += 2.0f * (lambda.transpose() * g_var).cwiseProduct(top.W) * inv_b;
      const Eigen::VectorXf grad_b = g_drive.colwise().sum().transpose() * inv_b;

      vW = static_cast<float>(cfg.momentum) * vW - static_cast<float>(cfg.learning_rate) * grad_W;
      vb = static_cast<float>(cfg.momentum) * vb - static_cast<float>(cfg.learning_rate) * grad_b;
      top.W += vW;
      top.b_h += vb;
      ++batches;
    }
    if (log)
      *log << "top epoch " << epoch << " mean loss " << loss_sum / static_cast<double>(batches)
           << "\n";
  }
}

// Greedy layerwise pretraining followed by the supervised top layer.
// Images must be in declared range (0,1); the input scaling to the
// [0, 0.2] band happens here, at the encoding boundary.
inline SdbnModel sdbn_pretrain(const LabeledImageSet& data, const SdbnTrainConfig& cfg,
                               std::ostream* log = nullptr) {
  check_labels(data);
  detail::check_unit_range(data, "sdbn_pretrain");
  const std::size_t count = cfg.train_subset == 0
                                ? data.size()
                                : std::min<std::size_t>(cfg.train_subset, data.size());
  if (count == 0) throw std::invalid_argument("sdbn_pretrain: empty dataset");
  if (cfg.hidden1 <= 0 || cfg.hidden2 <= 0)
    throw std::invalid_argument("sdbn_pretrain: bad layer sizes");
  if (cfg.layer1.neuron != cfg.neuron || cfg.layer2.neuron != cfg.neuron)
    throw std::invalid_argument("sdbn_pretrain: layer neuron params must match cfg.neuron");

  SdbnModel model;
  model.neuron = cfg.neuron;

  // Encoding boundary: pixels in (0,1) become activation probabilities in
  // [0, 0.2], i.e. input rates of at most 0.2 * r_max.
  Eigen::MatrixXf X0 =
      detail::images_to_matrix(data, count) * static_cast<float>(kInputScale);

  if (log) *log << "pretraining layer 1 (" << X0.rows() << " rows)\n";
  model.stack.push_back(rbm_train_pcd(X0, cfg.hidden1, cfg.layer1, log));

  const Eigen::MatrixXf H1 = rbm_hidden_probs(model.stack[0], X0, cfg.neuron);
  if (log) *log << "pretraining layer 2\n";
  model.stack.push_back(rbm_train_pcd(H1, cfg.hidden2, cfg.layer2, log));

  const Eigen::MatrixXf H2 = rbm_hidden_probs(model.stack[1], H1, cfg.neuron);

  // Top layer: supervised, lower layers frozen.
  Rbm top;
  Rng top_init = Rng::stream(cfg.top.seed, 0x1217);
  top.W.resize(cfg.hidden2, kClasses);
  for (int r = 0; r < top.W.rows(); ++r)
    for (int c = 0; c < top.W.cols(); ++c)
      top.W(r, c) = static_cast<float>(top_init.normal(0.0, cfg.top.weight_init_std));
  top.b_v = Eigen::VectorXf::Zero(cfg.hidden2);
  top.b_h = Eigen::VectorXf::Constant(kClasses, static_cast<float>(cfg.top.bias_init));

  std::vector<int> labels(data.labels.begin(), data.labels.begin() + count);
  if (log) *log << "training top layer\n";
  sdbn_train_top(top, H2, labels, cfg.top, cfg.neuron, log);
  model.stack.push_back(std::move(top));
  return model;
}

// Deterministic rate-mode forward pass: propagates exact rates layer by
// layer and normalizes the output rates into a probability vector.  A
// silent output layer yields the uniform distribution.
inline Eigen::MatrixXd sdbn_rate_forward_batch(const SdbnModel& model,
                                               std::span<const Image> images) {
  if (model.stack.size() != 3) throw std::invalid_argument("sdbn: expected 3 layers");
  Eigen::MatrixXf lambda(static_cast<Eigen::Index>(images.size()), Image::kPixels);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    if (img.lo != 0.0f || img.hi != 1.0f)
      throw std::invalid_argument("sdbn_rate_forward: image must be in declared range (0,1)");
    const float scale = static_cast<float>(kInputScale * model.neuron.r_max);
    for (int p = 0; p < Image::kPixels; ++p)
      lambda(static_cast<Eigen::Index>(i), p) = img.pixels[p] * scale;
  }
  for (const auto& rbm : model.stack)
    lambda = detail::layer_rates_exact(lambda, rbm, model.neuron);

  Eigen::MatrixXd probs(lambda.rows(), kClasses);
  for (Eigen::Index i = 0; i < lambda.rows(); ++i) {
    double sum = 0.0;
    for (int c = 0; c < kClasses; ++c) sum += lambda(i, c);
    if (sum <= 0.0) {
      probs.row(i).setConstant(1.0 / kClasses);
    } else {
      for (int c = 0; c < kClasses; ++c) probs(i, c) = lambda(i, c) / sum;
    }
  }
  return probs;
}

inline ProbabilityVector sdbn_rate_forward(const SdbnModel& model, const Image& img) {
  const auto probs = sdbn_rate_forward_batch(model, std::span<const Image>(&img, 1));
  ProbabilityVector p{};
  for (int c = 0; c < kClasses; ++c) p[c] = probs(0, c);
  return p;
}

inline double sdbn_evaluate(const SdbnModel& model, const LabeledImageSet& set) {
  check_labels(set);
  if (set.size() == 0) throw std::invalid_argument("sdbn_evaluate: empty set");
  const std::size_t chunk = 256;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < set.size(); start += chunk) {
    const std::size_t bs = std::min(chunk, set.size() - start);
    const auto probs =
        sdbn_rate_forward_batch(model, std::span<const Image>(&set.images[start], bs));
    for (std::size_t i = 0; i < bs; ++i) {
      ProbabilityVector pv{};
      for (int c = 0; c < kClasses; ++c) pv[c] = probs(static_cast<Eigen::Index>(i), c);
      if (argmax(pv) == set.labels[start + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

// Rate-mode black box; owns a frozen copy of the model.
inline Oracle sdbn_oracle(const SdbnModel& model) {
  auto shared = std::make_shared<const SdbnModel>(model);
  return [shared](const Image& img) { return sdbn_rate_forward(*shared, img); };
}

}  // namespace spikeadv
