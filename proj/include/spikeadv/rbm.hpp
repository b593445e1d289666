#pragma once

// Restricted Boltzmann machine whose units fire at rates given by the
// diffusion approximation (siegert.hpp) instead of the logistic function,
// trained with persistent contrastive divergence.
//
// Conventions
//   - Training data rows are activation probabilities in [0, 1].
//   - A unit at probability p emits Poisson spikes at p * r_max, so the
//     drive of a downstream unit is sum_i w_i p_i r_max + bias and its
//     variance accumulator is sum_i w_i^2 p_i r_max.
//   - A unit's activation probability is its rate times t_ref; sampled
//     binary states map 1 -> rate r_max, 0 -> silent.
//   - Stored biases are in drive units (Hz); internally the trainer
//     optimizes them on the same scale as weight-driven input (b / r_max)
//     so one learning rate serves both parameter groups.
//
// The Gibbs chain samples binary states; gradient statistics pair data or
// sampled visibles with hidden probabilities.  Rate evaluations inside
// the training loop come from the shared lookup table; nothing outside
// training uses the table.

#include <Eigen/Dense>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "spikeadv/rng.hpp"
#include "spikeadv/siegert.hpp"

namespace spikeadv {

struct Rbm {
  Eigen::MatrixXf W;    // visible x hidden
  Eigen::VectorXf b_v;  // visible bias [Hz drive]
  Eigen::VectorXf b_h;  // hidden bias [Hz drive]

  int visible() const { return static_cast<int>(W.rows()); }
  int hidden() const { return static_cast<int>(W.cols()); }
};

struct RbmTrainConfig {
  int epochs = 10;
  int minibatch = 100;
  int fantasy_particles = 100;
  int gibbs_steps = 1;  // chain updates per minibatch
  double learning_rate = 0.1;
  double momentum = 0.5;
  double weight_decay = 2e-4;
  double weight_init_std = 0.01;
  // Initial bias drives [Hz].  The firing threshold sits several noise
  // widths above a zero-drive membrane, so zero-bias units start silent
  // and produce no learning signal; a moderate positive drive puts them
  // in the responsive band.
  double hidden_bias_init = 100.0;
  double visible_bias_init = 75.0;
  std::uint64_t seed = 1;
  NeuronParams neuron;
};

namespace detail {

// Activation probabilities for a layer: P (batch x in, in [0,1]) through
// weights W with bias b_tilde (prob scale).  W2 must be W squared
// elementwise.
inline Eigen::MatrixXf rbm_probs(const Eigen::MatrixXf& P, const Eigen::MatrixXf& W,
                                 const Eigen::MatrixXf& W2, const Eigen::VectorXf& b_tilde,
                                 const SiegertTable& table) {
  const NeuronParams& np = table.params();
  Eigen::MatrixXf drive = P * W;
  drive.rowwise() += b_tilde.transpose();
  const Eigen::MatrixXf var = P * W2;
  Eigen::MatrixXf probs(drive.rows(), drive.cols());
  for (Eigen::Index r = 0; r < drive.rows(); ++r)
    for (Eigen::Index c = 0; c < drive.cols(); ++c) {
      const double mu = np.tau_m * np.r_max * static_cast<double>(drive(r, c));
      const double s2 = 0.5 * np.tau_m * np.r_max * static_cast<double>(var(r, c));
      probs(r, c) = static_cast<float>(table.rate(mu, s2) * np.t_ref);
    }
  return probs;
}

inline void rbm_sample(const Eigen::MatrixXf& probs, Eigen::MatrixXf& out, Rng& rng) {
  out.resize(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r)
    for (Eigen::Index c = 0; c < probs.cols(); ++c)
      out(r, c) = rng.uniform01() < static_cast<double>(probs(r, c)) ? 1.0f : 0.0f;
}

}  // namespace detail

// Persistent contrastive divergence.  Deterministic for a fixed config;
// zero epochs returns the untouched initialization.  Data rows are
// probability vectors in [0, 1].
inline Rbm rbm_train_pcd(const Eigen::MatrixXf& data, int hidden, const RbmTrainConfig& cfg,
                         std::ostream* log = nullptr) {
  if (hidden <= 0 || data.rows() == 0 || data.cols() == 0)
    throw std::invalid_argument("rbm_train_pcd: empty data or no hidden units");
  if (cfg.epochs < 0 || cfg.minibatch <= 0 || cfg.fantasy_particles <= 0 || cfg.gibbs_steps <= 0)
    throw std::invalid_argument("rbm_train_pcd: bad epochs/minibatch/particles");
  if (data.minCoeff() < 0.0f || data.maxCoeff() > 1.0f)
    throw std::invalid_argument("rbm_train_pcd: data outside [0,1]");

  const int visible = static_cast<int>(data.cols());
  const auto table = SiegertTable::shared(cfg.neuron);
  const float r_max = static_cast<float>(cfg.neuron.r_max);

  Rbm rbm;
  Rng init_rng = Rng::stream(cfg.seed, 0x1217);
  rbm.W.resize(visible, hidden);
  for (int r = 0; r < visible; ++r)
    for (int c = 0; c < hidden; ++c)
      rbm.W(r, c) = static_cast<float>(init_rng.normal(0.0, cfg.weight_init_std));
  rbm.b_v = Eigen::VectorXf::Constant(visible, static_cast<float>(cfg.visible_bias_init));
  rbm.b_h = Eigen::VectorXf::Constant(hidden, static_cast<float>(cfg.hidden_bias_init));
  if (cfg.epochs == 0) return rbm;

  // Prob-scale biases during optimization.
  Eigen::VectorXf bv = rbm.b_v / r_max;
  Eigen::VectorXf bh = rbm.b_h / r_max;

  Eigen::MatrixXf vW = Eigen::MatrixXf::Zero(visible, hidden);
  Eigen::VectorXf vbv = Eigen::VectorXf::Zero(visible);
  Eigen::VectorXf vbh = Eigen::VectorXf::Zero(hidden);

  Rng chain_rng = Rng::stream(cfg.seed, 0x6962);
  Rng shuffle_rng = Rng::stream(cfg.seed, 0x5351);

  // Fantasy particles start as fair coin flips over hidden states.
  Eigen::MatrixXf fantasy_h(cfg.fantasy_particles, hidden);
  for (Eigen::Index i = 0; i < fantasy_h.size(); ++i)
    fantasy_h(i) = chain_rng.uniform01() < 0.5 ? 1.0f : 0.0f;

  const Eigen::Index n = data.rows();
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;

  const float lr = static_cast<float>(cfg.learning_rate);
  const float mom = static_cast<float>(cfg.momentum);
  const float decay = static_cast<float>(cfg.weight_decay);

  Eigen::MatrixXf W2, v_sample, batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += cfg.minibatch) {
      const Eigen::Index bs = std::min<Eigen::Index>(cfg.minibatch, n - start);
      batch.resize(bs, visible);
      for (Eigen::Index i = 0; i < bs; ++i) batch.row(i) = data.row(order[start + i]);

      W2 = rbm.W.cwiseProduct(rbm.W);

      // Positive phase: hidden probabilities of the data.
      const Eigen::MatrixXf h_data = detail::rbm_probs(batch, rbm.W, W2, bh, *table);

      // Negative phase: advance the persistent chain.
      Eigen::MatrixXf v_probs, h_probs;
      for (int step = 0; step < cfg.gibbs_steps; ++step) {
        v_probs = detail::rbm_probs(fantasy_h, rbm.W.transpose(), W2.transpose(), bv, *table);
        detail::rbm_sample(v_probs, v_sample, chain_rng);
        h_probs = detail::rbm_probs(v_sample, rbm.W, W2, bh, *table);
        detail::rbm_sample(h_probs, fantasy_h, chain_rng);
      }

      const float inv_b = 1.0f / static_cast<float>(bs);
      const float inv_f = 1.0f / static_cast<float>(cfg.fantasy_particles);
      const Eigen::MatrixXf grad_W = (batch.transpose() * h_data) * inv_b -
                                     (v_sample.transpose() * h_probs) * inv_f -
                                     decay * rbm.W;
      const Eigen::VectorXf grad_bv =
          batch.colwise().mean().transpose() - v_sample.colwise().mean().transpose();
      const Eigen::VectorXf grad_bh =
          h_data.colwise().mean().transpose() - h_probs.colwise().mean().transpose();

      vW = mom * vW + lr * grad_W;
      vbv = mom * vbv + lr * grad_bv;
      vbh = mom * vbh + lr * grad_bh;
      rbm.W += vW;
      bv += vbv;
      bh += vbh;
    }
    if (log) {
      // Mean-field reconstruction error on the first few hundred rows.
      const Eigen::Index probe = std::min<Eigen::Index>(n, 256);
      W2 = rbm.W.cwiseProduct(rbm.W);
      const Eigen::MatrixXf h = detail::rbm_probs(data.topRows(probe), rbm.W, W2, bh, *table);
      const Eigen::MatrixXf v =
          detail::rbm_probs(h, rbm.W.transpose(), W2.transpose(), bv, *table);
      const double err = (v - data.topRows(probe)).cwiseAbs().mean();
      *log << "rbm epoch " << epoch << " recon " << err << "\n";
    }
  }

  rbm.b_v = bv * r_max;
  rbm.b_h = bh * r_max;
  return rbm;
}

// Hidden activation probabilities for data rows (probabilities in [0,1]).
// Exposed for stacking layers and for tests.
inline Eigen::MatrixXf rbm_hidden_probs(const Rbm& rbm, const Eigen::MatrixXf& data,
                                        const NeuronParams& neuron) {
  const auto table = SiegertTable::shared(neuron);
  const Eigen::MatrixXf W2 = rbm.W.cwiseProduct(rbm.W);
  const Eigen::VectorXf bh = rbm.b_h / static_cast<float>(neuron.r_max);
  return detail::rbm_probs(data, rbm.W, W2, bh, *table);
}

// Mean-field reconstruction: data -> hidden probabilities -> visible
// probabilities.  Used to monitor and test training.
inline Eigen::MatrixXf rbm_reconstruct(const Rbm& rbm, const Eigen::MatrixXf& data,
                                       const NeuronParams& neuron) {
  const auto table = SiegertTable::shared(neuron);
  const Eigen::MatrixXf W2 = rbm.W.cwiseProduct(rbm.W);
  const Eigen::VectorXf bh = rbm.b_h / static_cast<float>(neuron.r_max);
  const Eigen::VectorXf bv = rbm.b_v / static_cast<float>(neuron.r_max);
  const Eigen::MatrixXf h = detail::rbm_probs(data, rbm.W, W2, bh, *table);
  return detail::rbm_probs(h, rbm.W.transpose(), W2.transpose(), bv, *table);
}

}  // namespace spikeadv
