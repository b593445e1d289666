#pragma once

// Mean firing rate of a leaky integrate-and-fire neuron driven by Poisson
// inputs (diffusion approximation).  Given input rates lambda_i and weights
// w_i, the membrane statistics are
//
//   mu      = tau_m * (sum_i w_i lambda_i + bias)
//   sigma^2 = (tau_m / 2) * sum_i w_i^2 lambda_i
//
// and the rate is
//
//   rate = 1 / ( t_ref + tau_m * sqrt(pi) *
//                integral_{(v_reset-mu)/sigma}^{(v_th-mu)/sigma}
//                exp(u^2) * (1 + erf(u)) du )
//
// The integrand is evaluated through the scaled complementary error
// function erfcx to stay finite: exp(u^2)(1+erf(u)) equals erfcx(-u) for
// u <= 0 and 2 exp(u^2) - erfcx(u) for u > 0.  The integral uses adaptive
// Simpson quadrature to absolute tolerance 1e-9 (with a relative floor at
// double precision for huge integrals, where the rate is ~0 anyway).
//
// For sigma -> 0 the rate has the closed form
//   mu > v_th : 1 / (t_ref + tau_m * ln((mu - v_reset)/(mu - v_th)))
//   else      : 0
// and the output always lies in [0, 1/t_ref].

#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace spikeadv {

// Membrane and refractory constants.  r_max is the saturation rate and
// equals 1/t_ref, which keeps probability <-> rate conversions consistent:
// a unit at probability p fires at p * r_max, and a rate r corresponds to
// probability r * t_ref.
struct NeuronParams {
  double tau_m = 0.020;   // membrane time constant [s]
  double t_ref = 0.002;   // refractory period [s]
  double v_th = 1.0;      // firing threshold
  double v_reset = 0.0;   // reset potential
  double r_max = 500.0;   // saturation rate [Hz]

  bool operator==(const NeuronParams&) const = default;
};

class QuadratureError : public std::runtime_error {
 public:
  explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline constexpr double kSqrtPi = 1.7724538509055160273;

// Scaled complementary error function erfcx(x) = exp(x^2) erfc(x), x >= 0.
// Below 26 the direct product is exact to a few ulp; above it erfc
// underflows, so the continued asymptotic series takes over.
inline double erfcx_nonneg(double x) {
  if (x < 26.0) return std::exp(x * x) * std::erfc(x);
  // erfcx(x) ~ 1/(x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - 15/(8x^6) + 105/(16x^8))
  const double ix2 = 1.0 / (x * x);
  double s = 1.0 + ix2 * (-0.5 + ix2 * (0.75 + ix2 * (-1.875 + ix2 * 6.5625)));
  return s / (x * kSqrtPi);
}

// Integrand exp(u^2)(1 + erf(u)) in overflow-safe form.
inline double siegert_integrand(double u) {
  if (u <= 0.0) return erfcx_nonneg(-u);
  return 2.0 * std::exp(u * u) - erfcx_nonneg(u);
}

struct SimpsonState {
  double tol;
  int max_depth;
  bool converged = true;
  double bad_a = 0.0, bad_b = 0.0;
};

inline double simpson_recurse(double (*f)(double), double a, double b, double fa, double fm,
                              double fb, double whole, double tol, int depth,
                              SimpsonState& st) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || depth <= 0) {
    if (depth <= 0 && std::abs(delta) > 15.0 * tol) {
      st.converged = false;
      st.bad_a = a;
      st.bad_b = b;
    }
    return left + right + delta / 15.0;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, st) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, st);
}

// Adaptive Simpson integral of the Siegert integrand over [a, b].
// abs_tol is the requested absolute tolerance; for integrals so large that
// 1e-9 is below double resolution, the tolerance floor is relative.
inline double siegert_integral(double a, double b, double abs_tol) {
  const double m = 0.5 * (a + b);
  const double fa = siegert_integrand(a);
  const double fm = siegert_integrand(m);
  const double fb = siegert_integrand(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = std::max(abs_tol, std::abs(whole) * 1e-13);
  SimpsonState st{tol, 64};
  const double result =
      simpson_recurse(&siegert_integrand, a, b, fa, fm, fb, whole, tol, 64, st);
  if (!st.converged) {
    std::ostringstream msg;
    msg << "siegert quadrature failed to converge on [" << a << ", " << b
        << "] (subinterval [" << st.bad_a << ", " << st.bad_b << "])";
    throw QuadratureError(msg.str());
  }
  return result;
}

}  // namespace detail

// Closed-form sigma -> 0 limit.
inline double siegert_rate_deterministic(double mu, const NeuronParams& p) {
  if (mu <= p.v_th) return 0.0;
  return 1.0 / (p.t_ref + p.tau_m * std::log((mu - p.v_reset) / (mu - p.v_th)));
}

// Rate from precomputed membrane statistics mu and sigma^2.
inline double siegert_rate_stats(double mu, double sigma2, const NeuronParams& p) {
  if (!(sigma2 >= 0.0) || !std::isfinite(mu)) {
    std::ostringstream msg;
    msg << "siegert_rate_stats: invalid operands mu=" << mu << " sigma2=" << sigma2;
    throw QuadratureError(msg.str());
  }
  const double sigma = std::sqrt(sigma2);
  if (sigma < 1e-10) return siegert_rate_deterministic(mu, p);

  const double a = (p.v_reset - mu) / sigma;
  const double b = (p.v_th - mu) / sigma;
  // exp(b^2) >= exp(625) here: the mean first-passage time exceeds any
  // physical timescale and the rate is indistinguishable from zero.
  if (b > 25.0) return 0.0;

  const double integral = detail::siegert_integral(a, b, 1e-9);
  double rate = 1.0 / (p.t_ref + p.tau_m * detail::kSqrtPi * integral);
  if (rate < 0.0) rate = 0.0;
  if (rate > 1.0 / p.t_ref) rate = 1.0 / p.t_ref;
  return rate;
}

// Rate of one unit from its Poisson input rates, weights and bias.
inline double siegert_rate(std::span<const double> rates, std::span<const double> weights,
                           double bias, const NeuronParams& p) {
  if (rates.size() != weights.size())
    throw std::invalid_argument("siegert_rate: rates/weights size mismatch");
  double drive = bias;
  double var_sum = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    drive += weights[i] * rates[i];
    var_sum += weights[i] * weights[i] * rates[i];
  }
  const double mu = p.tau_m * drive;
  const double sigma2 = 0.5 * p.tau_m * var_sum;
  return siegert_rate_stats(mu, sigma2, p);
}

// Partial derivatives of the rate with respect to mu and sigma^2, from
// differentiating the closed form of the integral bounds:
//   dr/dmu      =  r^2 tau sqrt(pi) (g(b) - g(a)) / sigma
//   dr/dsigma^2 =  r^2 tau sqrt(pi) (b g(b) - a g(a)) / (2 sigma^2)
// with g the integrand.  Used by the supervised top-layer trainer.
struct SiegertGrad {
  double rate;
  double d_mu;
  double d_sigma2;
};

inline SiegertGrad siegert_rate_grad(double mu, double sigma2, const NeuronParams& p) {
  SiegertGrad g{siegert_rate_stats(mu, sigma2, p), 0.0, 0.0};
  const double sigma = std::sqrt(sigma2);
  if (sigma < 1e-10 || g.rate <= 0.0) {
    // Deterministic branch: differentiate the closed form in mu.
    if (mu > p.v_th && g.rate > 0.0) {
      const double inv = 1.0 / (mu - p.v_th) - 1.0 / (mu - p.v_reset);
      g.d_mu = g.rate * g.rate * p.tau_m * inv;
    }
    return g;
  }
  const double a = (p.v_reset - mu) / sigma;
  const double b = (p.v_th - mu) / sigma;
  if (b > 25.0) return g;
  const double ga = detail::siegert_integrand(a);
  const double gb = detail::siegert_integrand(b);
  const double r2tau = g.rate * g.rate * p.tau_m * detail::kSqrtPi;
  g.d_mu = r2tau * (gb - ga) / sigma;
  g.d_sigma2 = r2tau * (b * gb - a * ga) / (2.0 * sigma2);
  return g;
}

// Tabulated Siegert rate for training inner loops.
//
// Exact quadrature is a few microseconds per call, which is too slow for
// the Gibbs sampling inside pretraining (billions of evaluations).  The
// table covers the stochastic transition band in the coordinates
//   t = (v_th - mu) / sigma   in [-8, 25]
//   ln sigma                  in [ln 1e-3, ln 16]
// with bilinear interpolation.  Outside the band the rate is either
// indistinguishable from the deterministic limit (t < -8) or zero
// (t > 25), both of which are computed exactly.  Inference paths do not
// use the table; they call siegert_rate / siegert_rate_stats directly.
class SiegertTable {
 public:
  explicit SiegertTable(const NeuronParams& p, int t_points = 672, int s_points = 208)
      : params_(p), nt_(t_points), ns_(s_points) {
    t_lo_ = -8.0;
    t_hi_ = 25.0;
    ls_lo_ = std::log(1e-3);
    ls_hi_ = std::log(16.0);
    dt_ = (t_hi_ - t_lo_) / (nt_ - 1);
    dls_ = (ls_hi_ - ls_lo_) / (ns_ - 1);
    values_.resize(static_cast<std::size_t>(nt_) * ns_);
    for (int si = 0; si < ns_; ++si) {
      const double sigma = std::exp(ls_lo_ + si * dls_);
      for (int ti = 0; ti < nt_; ++ti) {
        const double t = t_lo_ + ti * dt_;
        const double mu = p.v_th - t * sigma;
        values_[static_cast<std::size_t>(si) * nt_ + ti] =
            siegert_rate_stats(mu, sigma * sigma, p);
      }
    }
  }

  const NeuronParams& params() const { return params_; }

  double rate(double mu, double sigma2) const {
    const double sigma = std::sqrt(sigma2);
    if (sigma < 1e-3) return siegert_rate_deterministic(mu, params_);
    const double t = (params_.v_th - mu) / sigma;
    if (t >= t_hi_) return 0.0;
    if (t <= t_lo_) return siegert_rate_deterministic(mu, params_);
    double ls = std::log(sigma);
    if (ls > ls_hi_) ls = ls_hi_;  // sigma beyond table: clamp
    double x = (t - t_lo_) / dt_;
    double y = (ls - ls_lo_) / dls_;
    int xi = static_cast<int>(x);
    int yi = static_cast<int>(y);
    if (xi >= nt_ - 1) xi = nt_ - 2;
    if (yi >= ns_ - 1) yi = ns_ - 2;
    const double fx = x - xi, fy = y - yi;
    const double* base = values_.data() + static_cast<std::size_t>(yi) * nt_ + xi;
    const double v00 = base[0], v10 = base[1];
    const double v01 = base[nt_], v11 = base[nt_ + 1];
    return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 +
           fx * fy * v11;
  }

  double probability(double mu, double sigma2) const {
    return rate(mu, sigma2) * params_.t_ref;
  }

  // Process-wide cache: the table depends only on the neuron parameters,
  // and sweeps train many networks with the same ones.
  static std::shared_ptr<const SiegertTable> shared(const NeuronParams& p) {
    static std::mutex mu;
    static std::vector<std::shared_ptr<const SiegertTable>> cache;
    std::lock_guard<std::mutex> lock(mu);
    for (const auto& t : cache)
      if (t->params() == p) return t;
    cache.push_back(std::make_shared<SiegertTable>(p));
    return cache.back();
  }

 private:
  NeuronParams params_;
  int nt_, ns_;
  double t_lo_, t_hi_, ls_lo_, ls_hi_, dt_, dls_;
  std::vector<double> values_;
};

}  // namespace spikeadv
