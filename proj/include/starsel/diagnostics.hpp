#ifndef STARSEL_DIAGNOSTICS_HPP
#define STARSEL_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "starsel/error.hpp"

namespace starsel {

/// Sample quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double prob) {
  if (v.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double quantile(const Eigen::VectorXd& v, double prob) {
  return quantile(std::vector<double>(v.data(), v.data() + v.size()), prob);
}

namespace detail {

inline double mean(const Eigen::VectorXd& x) { return x.mean(); }

inline double variance(const Eigen::VectorXd& x) {
  if (x.size() < 2) return 0.0;
  return (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
}

inline double autocovariance(const Eigen::VectorXd& x, double mu, Eigen::Index lag) {
  const Eigen::Index n = x.size();
  double s = 0.0;
  for (Eigen::Index t = 0; t + lag < n; ++t) s += (x(t) - mu) * (x(t + lag) - mu);
  return s / static_cast<double>(n);
}

}  // namespace detail

/// Effective sample size across chains of equal length, using the
/// within/between variance combination and Geyer's initial monotone sequence.
inline double effective_sample_size(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) throw InvalidArgument("no chains");
  const Eigen::Index n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw InvalidArgument("chains differ in length");
  const auto m = static_cast<double>(chains.size());
  if (n < 4) return m * static_cast<double>(n);

  std::vector<double> mu(chains.size()), var(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    mu[c] = detail::mean(chains[c]);
    var[c] = detail::variance(chains[c]);
  }
  double W = 0.0;
  for (double v : var) W += v;
  W /= m;
  double B = 0.0;
  if (chains.size() > 1) {
    double grand = 0.0;
    for (double v : mu) grand += v;
    grand /= m;
    for (double v : mu) B += (v - grand) * (v - grand);
    B *= static_cast<double>(n) / (m - 1.0);
  }
  const auto nd = static_cast<double>(n);
  const double var_plus = (nd - 1.0) / nd * W + B / nd;
  if (!(var_plus > 0.0)) return m * nd;

  auto rho = [&](Eigen::Index lag) {
    if (lag == 0) return 1.0;
    double acov = 0.0;
    for (std::size_t c = 0; c < chains.size(); ++c)
      acov += detail::autocovariance(chains[c], mu[c], lag);
    acov /= m;
    return 1.0 - (W - acov) / var_plus;
  };

  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(m * nd + 10.0));
  return m * nd / tau;
}

inline double effective_sample_size(const Eigen::VectorXd& chain) {
  return effective_sample_size(std::vector<Eigen::VectorXd>{chain});
}

/// Split potential scale reduction factor; 1 for constant parameters.
inline double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> halves;
  for (const auto& c : chains) {
    const Eigen::Index h = c.size() / 2;
    if (h < 2) continue;
    halves.push_back(c.head(h));
    halves.push_back(c.segment(c.size() - h, h));
  }
  if (halves.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto m = static_cast<double>(halves.size());
  const auto n = static_cast<double>(halves.front().size());
  double W = 0.0, grand = 0.0;
  std::vector<double> mu;
  for (const auto& h : halves) {
    W += detail::variance(h);
    mu.push_back(h.mean());
    grand += h.mean();
  }
  W /= m;
  grand /= m;
  double B = 0.0;
  for (double v : mu) B += (v - grand) * (v - grand);
  B *= n / (m - 1.0);
  if (!(W > 0.0)) return B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

/// Monte Carlo standard error of the pooled mean.
inline double mc_standard_error(const std::vector<Eigen::VectorXd>& chains) {
  Eigen::Index total = 0;
  for (const auto& c : chains) total += c.size();
  Eigen::VectorXd all(total);
  Eigen::Index k = 0;
  for (const auto& c : chains) {
    all.segment(k, c.size()) = c;
    k += c.size();
  }
  const double ess = effective_sample_size(chains);
  return std::sqrt(detail::variance(all) / ess);
}

}  // namespace starsel

#endif  // STARSEL_DIAGNOSTICS_HPP
