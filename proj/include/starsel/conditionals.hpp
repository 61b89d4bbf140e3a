#ifndef STARSEL_CONDITIONALS_HPP
#define STARSEL_CONDITIONALS_HPP

// Closed-form full conditionals of the spike-and-slab hierarchy.

#include <cmath>

#include "starsel/error.hpp"

namespace starsel {

/// Inverse gamma with density proportional to x^{-shape-1} exp(-scale/x).
struct InverseGammaParams {
  double shape;
  double scale;
  double mean() const { return shape > 1.0 ? scale / (shape - 1.0) : INFINITY; }
  double log_density(double x) const {
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) -
           scale / x;
  }
};

struct BetaParams {
  double a;
  double b;
  double mean() const { return a / (a + b); }
  double log_density(double x) const {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
           (b - 1.0) * std::log1p(-x);
  }
};

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// P(m = +1 | xi) for xi ~ N(m, 1) and m = +-1 equally likely.
inline double m_probability(double xi) { return logistic(2.0 * xi); }

/// tau^2 | . for a block with squared coefficient norm `sumsq` and `dim`
/// prior-independent coefficients (dim = 1 for the expanded alpha layer).
inline InverseGammaParams tau2_conditional(double a_tau, double b_tau, double sumsq,
                                           double gamma, double dim = 1.0) {
  return {a_tau + 0.5 * dim, b_tau + sumsq / (2.0 * gamma)};
}

/// log P(gamma=1|.) - log P(gamma=v0|.), including the prior odds w/(1-w).
inline double gamma_log_odds(double sumsq, double tau2, double w, double v0,
                             double dim = 1.0) {
  return std::log(w) - std::log1p(-w) + 0.5 * dim * std::log(v0) +
         (1.0 - v0) / (2.0 * v0) * sumsq / tau2;
}

inline double gamma_probability(double sumsq, double tau2, double w, double v0,
                                double dim = 1.0) {
  return logistic(gamma_log_odds(sumsq, tau2, w, v0, dim));
}

inline BetaParams w_conditional(double a_w, double b_w, double n_slab, double n_spike) {
  return {a_w + n_slab, b_w + n_spike};
}

inline InverseGammaParams sigma2_conditional(double a_sigma, double b_sigma, double n,
                                             double rss) {
  return {a_sigma + 0.5 * n, b_sigma + 0.5 * rss};
}

struct RescaleResult {
  double factor = 1.0;  // xi' = factor * xi, alpha' = alpha / factor
  bool skipped = false;
};

/// Rescales a block to mean |xi| = 1 keeping alpha * xi fixed.
template <class Vec>
inline RescaleResult rescale(double& alpha, Vec&& xi) {
  const double s = xi.cwiseAbs().sum();
  if (!(s > 0.0) || !std::isfinite(s)) return {1.0, true};
  const double d = static_cast<double>(xi.size());
  const double f = d / s;
  xi *= f;
  alpha *= s / d;
  return {f, false};
}

}  // namespace starsel

#endif  // STARSEL_CONDITIONALS_HPP
