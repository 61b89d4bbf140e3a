#ifndef STARSEL_SHRINKAGE_HPP
#define STARSEL_SHRINKAGE_HPP

// Marginal prior densities implied by the spike-and-slab hierarchies, log-prior
// contour grids and the indicator transition curves of the unexpanded sampler.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <Eigen/Dense>

#include "starsel/conditionals.hpp"
#include "starsel/error.hpp"
#include "starsel/model.hpp"

namespace starsel {

/// The scalar NMIG prior on alpha, after integrating out tau^2 and gamma, is a
/// two-component scaled Student-t mixture.
struct NmigMixture {
  double df;
  double s0;  // spike scale
  double s1;  // slab scale
  double w;   // slab weight

  static NmigMixture from(const Hyperparams& h, double w) {
    return {2.0 * h.a_tau, std::sqrt(h.v0 * h.b_tau / h.a_tau), std::sqrt(h.b_tau / h.a_tau), w};
  }

  double t_density(double x, double s) const {
    const double z = x / s;
    const double lc = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                      0.5 * std::log(df * std::numbers::pi);
    return std::exp(lc - 0.5 * (df + 1.0) * std::log1p(z * z / df)) / s;
  }

  double density(double x) const {
    return (1.0 - w) * t_density(x, s0) + w * t_density(x, s1);
  }
};

inline double nmig_marginal_density(double alpha, const Hyperparams& hyper, double w) {
  return NmigMixture::from(hyper, w).density(alpha);
}

/// Prior mean of w; the t-mixture is linear in w so this integrates w out exactly.
inline double prior_weight_mean(const Hyperparams& h) { return h.a_w / (h.a_w + h.b_w); }

namespace detail {

inline double xi_density(double x) {
  constexpr double c = 0.3989422804014327;  // 1/sqrt(2 pi)
  return 0.5 * c * (std::exp(-0.5 * (x - 1.0) * (x - 1.0)) + std::exp(-0.5 * (x + 1.0) * (x + 1.0)));
}

inline double xi_cdf(double x) {
  auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  return 0.5 * (Phi(x - 1.0) + Phi(x + 1.0));
}

constexpr double kRelTol = 1e-10;
constexpr double kReportTol = 1e-6;

/// Integrates f(u) over [lo, hi] split at the given breakpoints, with adaptive
/// 61-point Gauss-Kronrod on each piece.
template <class F>
double piecewise_integral(F&& f, double lo, double hi, std::vector<double> cuts,
                          const std::string& what) {
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0, err = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = std::max(cuts[i], lo), b = std::min(cuts[i + 1], hi);
    if (!(b > a)) continue;
    double e = 0.0, piece_l1 = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, kRelTol,
                                                                           &e, &piece_l1);
    err += e;
    l1 += piece_l1;
  }
  if (!std::isfinite(total) || err > kReportTol * std::max(l1, 1e-300)) {
    std::ostringstream os;
    os << "quadrature did not converge for " << what << ": estimate " << total
       << ", error estimate " << err << ", L1 " << l1;
    throw QuadratureError(os.str());
  }
  return total;
}

}  // namespace detail

/// Scalar peNMIG prior density of beta = alpha * xi with w integrated out.
/// Unbounded at zero, where +infinity is returned.
inline double penmig_density(double beta, const Hyperparams& hyper) {
  const double b = std::abs(beta);
  if (b == 0.0) return std::numeric_limits<double>::infinity();
  const NmigMixture mix = NmigMixture::from(hyper, prior_weight_mean(hyper));
  // p(beta) = 2 int_0^inf p_alpha(a) p_xi(beta / a) / a da, taken over u = log a
  auto f = [&](double u) {
    const double a = std::exp(u);
    return 2.0 * mix.density(a) * detail::xi_density(b / a);
  };
  const double lo = std::log(b) - std::log(41.0);
  const double hi = std::max(std::log(b), std::log(mix.s1)) + 12.0;
  return detail::piecewise_integral(f, lo, hi, {std::log(b), std::log(mix.s0), std::log(mix.s1)},
                                    "peNMIG density at " + std::to_string(beta));
}

/// P(beta <= x) under the scalar peNMIG prior.
inline double penmig_cdf(double x, const Hyperparams& hyper) {
  if (x == 0.0) return 0.5;
  const NmigMixture mix = NmigMixture::from(hyper, prior_weight_mean(hyper));
  const double b = std::abs(x);
  // P(alpha xi <= x) = int p_alpha(a) F_xi(x / |a|) da by symmetry of xi
  auto f = [&](double u) {
    const double a = std::exp(u);
    return 2.0 * a * mix.density(a) * (detail::xi_cdf(b / a) - 0.5);
  };
  const double lo = std::log(b) - std::log(41.0) - 30.0;
  const double hi = std::max(std::log(b), std::log(mix.s1)) + 12.0;
  const double upper = 0.5 + detail::piecewise_integral(
                                 f, lo, hi, {std::log(b), std::log(mix.s0), std::log(mix.s1)},
                                 "peNMIG cdf at " + std::to_string(x));
  return x > 0.0 ? upper : 1.0 - upper;
}

struct MarginalPriorGrid {
  std::vector<double> beta_grid;
  std::vector<double> log_density;
  double normalization = 0.0;  // integral of the density over [min grid, max grid]
};

/// Integral of the peNMIG density over [lo, hi], by quadrature of the density
/// itself (tanh-sinh copes with the logarithmic singularity at zero).
inline double penmig_mass(double lo, double hi, const Hyperparams& hyper) {
  if (!(hi > lo)) throw InvalidArgument("penmig_mass needs lo < hi");
  boost::math::quadrature::tanh_sinh<double> ts;
  auto dens = [&](double b) { return penmig_density(b, hyper); };
  auto piece = [&](double a, double b) {
    double err = 0.0, l1 = 0.0;
    const double v = ts.integrate(dens, a, b, 1e-9, &err, &l1);
    if (!std::isfinite(v) || err > detail::kReportTol * std::max(l1, 1e-300))
      throw QuadratureError("mass integral over [" + std::to_string(a) + ", " +
                            std::to_string(b) + "] did not converge");
    return v;
  };
  if (lo < 0.0 && hi > 0.0) return piece(lo, 0.0) + piece(0.0, hi);
  return piece(lo, hi);
}

inline MarginalPriorGrid penmig_marginal_density(const std::vector<double>& beta_grid,
                                                 const Hyperparams& hyper) {
  hyper.validate();
  if (beta_grid.empty()) throw InvalidArgument("empty beta grid");
  MarginalPriorGrid g;
  g.beta_grid = beta_grid;
  g.log_density.reserve(beta_grid.size());
  for (double b : beta_grid) {
    if (b == 0.0 || !std::isfinite(b))
      throw InvalidArgument("beta grid must be finite and exclude 0");
    g.log_density.push_back(std::log(penmig_density(b, hyper)));
  }
  const auto [mn, mx] = std::minmax_element(beta_grid.begin(), beta_grid.end());
  g.normalization = *mx > *mn ? penmig_mass(*mn, *mx, hyper) : 0.0;
  return g;
}

enum class ContourMode { nmig_separate, penmig_separate, penmig_same_block };

inline std::string to_string(ContourMode m) {
  switch (m) {
    case ContourMode::nmig_separate: return "nmig_separate";
    case ContourMode::penmig_separate: return "penmig_separate";
    case ContourMode::penmig_same_block: return "penmig_same_block";
  }
  return "unknown";
}

/// Joint peNMIG density of two coefficients sharing one alpha.
inline double penmig_block_density(double b1, double b2, const Hyperparams& hyper) {
  const double x1 = std::abs(b1), x2 = std::abs(b2);
  const double big = std::max(x1, x2);
  if (big == 0.0) return std::numeric_limits<double>::infinity();
  const NmigMixture mix = NmigMixture::from(hyper, prior_weight_mean(hyper));
  auto f = [&](double u) {
    const double a = std::exp(u);
    return 2.0 * mix.density(a) * detail::xi_density(x1 / a) * detail::xi_density(x2 / a) / a;
  };
  std::vector<double> cuts{std::log(mix.s0), std::log(mix.s1)};
  if (x1 > 0.0) cuts.push_back(std::log(x1));
  if (x2 > 0.0) cuts.push_back(std::log(x2));
  const double lo = std::log(big) - std::log(41.0);
  const double hi = std::max(std::log(big), std::log(mix.s1)) + 12.0;
  return detail::piecewise_integral(f, lo, hi, cuts, "joint peNMIG density");
}

/// log p(beta1, beta2) on grid x grid (rows index beta1). Points where the
/// density is unbounded hold +infinity.
inline Eigen::MatrixXd log_prior_contours(const std::vector<double>& grid, const Hyperparams& hyper,
                                          ContourMode mode) {
  hyper.validate();
  for (double g : grid)
    if (!std::isfinite(g)) throw InvalidArgument("contour grid must be finite");
  const Eigen::Index k = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd out(k, k);
  if (mode == ContourMode::penmig_same_block) {
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        out(i, j) = out(j, i) = std::log(penmig_block_density(grid[i], grid[j], hyper));
    return out;
  }
  Eigen::VectorXd single(k);
  for (Eigen::Index i = 0; i < k; ++i)
    single(i) = mode == ContourMode::nmig_separate
                    ? std::log(nmig_marginal_density(grid[i], hyper, prior_weight_mean(hyper)))
                    : std::log(penmig_density(grid[i], hyper));
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = single(i) + single(j);
  return out;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return v;
}

/// Default contour grid: [-3, 3] with 301 points per axis.
inline std::vector<double> default_contour_grid() { return linspace(-3.0, 3.0, 301); }

/// Sum of squares at which P(gamma = 1) = 1/2 for w = 1/2.
inline double equilibrium_sumsq(int d, double tau2, double v0) {
  return -(d * v0 / (1.0 - v0)) * std::log(v0) * tau2;
}

/// P(gamma_1 = 1) for the unexpanded sampler one step after an equilibrium
/// state. Starting from the equilibrium sum of squares at tau2_0 (default:
/// the prior mean of tau^2), tau^2 is fixed at the requested quantile of its
/// conditional given gamma0, and the indicator probability is evaluated at
/// ratio * equilibrium sum of squares.
inline std::vector<double> nmig_transition_curve(int d, double gamma0, double tau2_quantile,
                                                 const std::vector<double>& ratio_grid,
                                                 const Hyperparams& hyper,
                                                 std::optional<double> tau2_0 = std::nullopt) {
  hyper.validate();
  if (d < 1) throw InvalidArgument("transition curve needs d >= 1");
  if (!(tau2_quantile > 0.0 && tau2_quantile < 1.0))
    throw InvalidArgument("tau2 quantile must lie in (0, 1)");
  if (!(gamma0 > 0.0)) throw InvalidArgument("gamma0 must be positive");
  const double t0 = tau2_0.value_or(hyper.a_tau > 1.0 ? hyper.b_tau / (hyper.a_tau - 1.0)
                                                      : hyper.b_tau / hyper.a_tau);
  const double ss0 = equilibrium_sumsq(d, t0, hyper.v0);
  const auto ig = tau2_conditional(hyper.a_tau, hyper.b_tau, ss0, gamma0, d);
  const boost::math::inverse_gamma_distribution<double> dist(ig.shape, ig.scale);
  const double tau2_1 = boost::math::quantile(dist, tau2_quantile);
  std::vector<double> p;
  p.reserve(ratio_grid.size());
  for (double r : ratio_grid) p.push_back(gamma_probability(r * ss0, tau2_1, 0.5, hyper.v0, d));
  return p;
}

}  // namespace starsel

#endif  // STARSEL_SHRINKAGE_HPP
