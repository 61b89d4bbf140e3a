#ifndef STARSEL_SIMLAB_HPP
#define STARSEL_SIMLAB_HPP

// Simulation designs for additive models, selection metrics, predictive
// deviance and the piecewise-exponential expansion of survival data.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "starsel/error.hpp"
#include "starsel/model.hpp"
#include "starsel/random.hpp"

namespace starsel {

namespace detail {
inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
}  // namespace detail

/// The four test functions; each has a linear component, f2..f4 also a
/// nonlinear one.
inline double dgp_f(int k, double x) {
  switch (k) {
    case 1: return x;
    case 2: return x + (2.0 * x - 2.0) * (2.0 * x - 2.0) / 5.5;
    case 3: return -x + std::numbers::pi * std::sin(std::numbers::pi * x);
    case 4:
      return 0.5 * x + 15.0 * detail::std_normal_pdf(2.0 * (x - 0.2)) -
             detail::std_normal_pdf(x + 0.4);
  }
  throw InvalidArgument("dgp_f index must be 1..4");
}

/// Link function for the concurvity designs.
inline double concurvity_g(double x) {
  using detail::std_normal_cdf;
  return 2.0 * std_normal_cdf((x + 1.0) / 0.4) + 2.0 * std_normal_cdf((x - 1.0) / 0.3) -
         4.0 * detail::std_normal_pdf(x) - 2.0;
}

enum class Sparsity { low, high };
enum class Correlation { iid_uniform, ar1 };

struct ConcurvitySpec {
  int scenario = 1;  // 1, 2 or 3
  double c = 0.0;
  double snr = 5.0;
};

struct ScenarioSpec {
  Family family = Family::gaussian;
  Sparsity sparsity = Sparsity::high;
  Correlation correlation = Correlation::iid_uniform;
  double rho = 0.7;
  int n = 200;
  double snr = 5.0;            // gaussian only
  bool overdispersion = true;  // poisson only
  std::optional<ConcurvitySpec> concurvity;
  std::uint64_t replicate_seed = 1;
  int n_test = 5000;

  int num_covariates() const {
    if (concurvity) return 10;
    return sparsity == Sparsity::low ? 16 : 20;
  }

  void validate() const {
    if (n < 2 || n_test < 0) throw InvalidArgument("scenario sizes must be positive");
    if (!(rho > -1.0 && rho < 1.0)) throw InvalidArgument("rho must lie in (-1, 1)");
    if (family == Family::gaussian && !(snr > 0.0)) throw InvalidArgument("snr must be positive");
    if (concurvity) {
      if (concurvity->scenario < 1 || concurvity->scenario > 3)
        throw InvalidArgument("concurvity scenario must be 1, 2 or 3");
      if (!(concurvity->c >= 0.0 && concurvity->c <= 1.0))
        throw InvalidArgument("concurvity c must lie in [0, 1]");
      if (family != Family::gaussian) throw InvalidArgument("concurvity designs are gaussian");
    }
  }
};

/// Which test function (1..4) covariate k (0-based) enters with, with its
/// multiplier; 0 when it does not enter.
struct CovariateEffect {
  int f = 0;
  double weight = 0.0;
};

inline std::vector<CovariateEffect> covariate_effects(const ScenarioSpec& s) {
  std::vector<CovariateEffect> e(s.num_covariates());
  if (s.concurvity || s.sparsity == Sparsity::high) {
    for (int k = 0; k < 4; ++k) e[k] = {k + 1, 1.0};
  } else {
    const double w[3] = {1.0, 1.5, 2.0};
    for (int k = 0; k < 12; ++k) e[k] = {k % 4 + 1, w[k / 4]};
  }
  return e;
}

/// Truth flags in term order (linear, smooth) per covariate.
inline std::vector<bool> truth_flags(const ScenarioSpec& s) {
  std::vector<bool> t;
  for (const auto& e : covariate_effects(s)) {
    t.push_back(e.f != 0);
    t.push_back(e.f >= 2);
  }
  return t;
}

struct SimData {
  Eigen::MatrixXd X;  // n x covariates
  Eigen::VectorXd eta;
  Eigen::VectorXd y;
};

struct Scenario {
  ScenarioSpec spec;
  SimData train;
  SimData test;
  double sigma2 = 1.0;  // gaussian noise variance
  std::vector<bool> truth;
  std::vector<std::string> names;
};

namespace detail {

inline Eigen::MatrixXd draw_covariates(const ScenarioSpec& s, Rng& rng, int n) {
  const int p = s.num_covariates();
  Eigen::MatrixXd X(n, p);
  if (s.correlation == Correlation::iid_uniform || s.concurvity) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < p; ++k) X(i, k) = rng.uniform(-2.0, 2.0);
  } else {
    // Gaussian AR(1) across covariates with unit marginal variance, mapped to U[-2, 2]
    const double innov = std::sqrt(1.0 - s.rho * s.rho);
    for (int i = 0; i < n; ++i) {
      double z = rng.normal();
      for (int k = 0; k < p; ++k) {
        if (k > 0) z = s.rho * z + innov * rng.normal();
        X(i, k) = 4.0 * (std_normal_cdf(z) - 0.5);
      }
    }
  }
  if (s.concurvity) {
    const double c = s.concurvity->c;
    // (target, source) covariate for each design, 0-based
    const int tgt[3] = {3, 4, 3}, src[3] = {2, 3, 4};
    const int t = tgt[s.concurvity->scenario - 1], so = src[s.concurvity->scenario - 1];
    for (int i = 0; i < n; ++i) {
      const double u = rng.normal();
      X(i, t) = c * concurvity_g(X(i, so)) + (1.0 - c) * u;
    }
  }
  return X;
}

inline Eigen::VectorXd linear_predictor(const ScenarioSpec& s, const Eigen::MatrixXd& X) {
  const auto eff = covariate_effects(s);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (std::size_t k = 0; k < eff.size(); ++k)
      if (eff[k].f) eta(i) += eff[k].weight * dgp_f(eff[k].f, X(i, static_cast<Eigen::Index>(k)));
  return eta;
}

inline Eigen::VectorXd draw_response(const ScenarioSpec& s, Rng& rng, const Eigen::VectorXd& eta,
                                     double sigma2) {
  Eigen::VectorXd y(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    switch (s.family) {
      case Family::gaussian: y(i) = eta(i) + std::sqrt(sigma2) * rng.normal(); break;
      case Family::poisson: {
        const double si = s.overdispersion ? rng.uniform(0.66, 1.5) : 1.0;
        y(i) = static_cast<double>(rng.poisson(si * std::exp(eta(i))));
        break;
      }
      case Family::binomial_logit: {
        const double p = 1.0 / (1.0 + std::exp(-eta(i)));
        y(i) = rng.bernoulli(p) ? 1.0 : 0.0;
        break;
      }
    }
  }
  return y;
}

}  // namespace detail

/// Training and test data for one replicate. Training data are drawn first,
/// then test data, from a single stream keyed by the replicate seed.
inline Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Scenario sc;
  sc.spec = spec;
  sc.truth = truth_flags(spec);
  for (int k = 0; k < spec.num_covariates(); ++k) sc.names.push_back("x" + std::to_string(k + 1));
  Rng rng(spec.replicate_seed, 0x5eed);

  sc.train.X = detail::draw_covariates(spec, rng, spec.n);
  sc.train.eta = detail::linear_predictor(spec, sc.train.X);
  if (spec.family == Family::gaussian) {
    const double snr = spec.concurvity ? spec.concurvity->snr : spec.snr;
    const Eigen::VectorXd c = sc.train.eta.array() - sc.train.eta.mean();
    sc.sigma2 = c.squaredNorm() / static_cast<double>(spec.n - 1) / snr;
  }
  sc.train.y = detail::draw_response(spec, rng, sc.train.eta, sc.sigma2);

  sc.test.X = detail::draw_covariates(spec, rng, spec.n_test);
  sc.test.eta = detail::linear_predictor(spec, sc.test.X);
  sc.test.y = detail::draw_response(spec, rng, sc.test.eta, sc.sigma2);
  return sc;
}

struct ComplexityMetrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;  // NaN without true positives in the truth
  double specificity = 0.0;  // NaN without true negatives in the truth
};

inline ComplexityMetrics complexity_metrics(const std::vector<bool>& selected,
                                            const std::vector<bool>& truth) {
  if (selected.size() != truth.size()) throw InvalidArgument("selection and truth differ in length");
  if (truth.empty()) throw InvalidArgument("empty truth vector");
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) (selected[i] ? tp : fn) += 1;
    else (selected[i] ? fp : tn) += 1;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {(tp + tn) / static_cast<double>(truth.size()), tp + fn > 0 ? tp / (tp + fn) : nan,
          tn + fp > 0 ? tn / (tn + fp) : nan};
}

/// Terms with inclusion probability above the threshold.
inline std::vector<bool> select_terms(const Eigen::VectorXd& pincl, double threshold = 0.5) {
  std::vector<bool> s(pincl.size());
  for (Eigen::Index j = 0; j < pincl.size(); ++j) s[j] = pincl(j) > threshold;
  return s;
}

struct DevianceExtras {
  double sigma2 = 1.0;                     // gaussian
  std::optional<Eigen::VectorXd> offsets;  // added to eta_hat
};

/// Twice the average negative log-likelihood on test data.
inline double predictive_deviance(Family family, const Eigen::VectorXd& y_test,
                                  const Eigen::VectorXd& eta_hat, const DevianceExtras& extras = {}) {
  if (y_test.size() == 0) throw InvalidArgument("empty test set");
  Eigen::VectorXd eta = eta_hat;
  if (extras.offsets) {
    if (extras.offsets->size() != eta.size()) throw InvalidArgument("offset length mismatch");
    eta += *extras.offsets;
  }
  return -2.0 * log_likelihood(family, eta, y_test, extras.sigma2) /
         static_cast<double>(y_test.size());
}

/// Interval-expanded survival data: one pseudo-observation per subject and
/// interval under risk.
struct PemDataset {
  Eigen::VectorXd delta;   // event indicator per row
  Eigen::VectorXd offset;  // time under risk in the interval
  std::vector<int> interval;  // 0-based interval index
  std::vector<int> subject;   // 0-based subject index
  Eigen::MatrixXd X;          // covariate rows replicated per interval
  std::vector<double> cutpoints;

  Eigen::Index rows() const { return delta.size(); }
  int num_intervals() const { return static_cast<int>(cutpoints.size()) - 1; }
  Eigen::VectorXd log_offset() const { return offset.array().log(); }
};

inline void validate_cutpoints(const std::vector<double>& kappa) {
  if (kappa.size() < 2 || kappa.front() != 0.0)
    throw InvalidArgument("cutpoints must start at 0 and define at least one interval");
  for (std::size_t j = 1; j < kappa.size(); ++j)
    if (!(kappa[j] > kappa[j - 1])) throw InvalidArgument("cutpoints must be strictly increasing");
}

/// Interval index j with kappa_{j} < t <= kappa_{j+1}.
inline int interval_of(double t, const std::vector<double>& kappa) {
  for (std::size_t j = 1; j < kappa.size(); ++j)
    if (t <= kappa[j]) return static_cast<int>(j) - 1;
  return -1;
}

inline PemDataset pem_expand(const std::vector<double>& times, const std::vector<bool>& events,
                             const std::vector<double>& kappa,
                             const Eigen::MatrixXd& covariates = Eigen::MatrixXd()) {
  validate_cutpoints(kappa);
  if (times.size() != events.size()) throw InvalidArgument("times and events differ in length");
  const bool has_x = covariates.size() > 0;
  if (has_x && covariates.rows() != static_cast<Eigen::Index>(times.size()))
    throw InvalidArgument("covariate rows differ from number of subjects");
  std::vector<double> d, o;
  PemDataset ds;
  ds.cutpoints = kappa;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (!(t > 0.0) || !std::isfinite(t)) throw DataError("survival times must be positive");
    if (t > kappa.back())
      throw DataError("time " + std::to_string(t) + " of subject " + std::to_string(i + 1) +
                      " exceeds the last cutpoint");
    const int last = interval_of(t, kappa);
    for (int j = 0; j <= last; ++j) {
      const double oij = std::max(0.0, std::min(kappa[j + 1] - kappa[j], t - kappa[j]));
      const bool ev = events[i] && j == last;
      if (!(oij > 0.0) && !ev) continue;
      d.push_back(ev ? 1.0 : 0.0);
      o.push_back(oij);
      ds.interval.push_back(j);
      ds.subject.push_back(static_cast<int>(i));
    }
  }
  ds.delta = Eigen::Map<Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
  ds.offset = Eigen::Map<Eigen::VectorXd>(o.data(), static_cast<Eigen::Index>(o.size()));
  if (has_x) {
    ds.X.resize(ds.rows(), covariates.cols());
    for (Eigen::Index r = 0; r < ds.rows(); ++r) ds.X.row(r) = covariates.row(ds.subject[r]);
  }
  return ds;
}

/// Direct piecewise-exponential log-likelihood: sum of event log-hazards minus
/// cumulative hazards, with log-hazard log_baseline[j] + eta[i] on interval j.
inline double pem_log_likelihood(const std::vector<double>& times, const std::vector<bool>& events,
                                 const std::vector<double>& kappa,
                                 const std::vector<double>& log_baseline,
                                 const Eigen::VectorXd& eta) {
  validate_cutpoints(kappa);
  if (log_baseline.size() + 1 != kappa.size()) throw InvalidArgument("one baseline per interval");
  double ll = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const int last = interval_of(t, kappa);
    if (last < 0) throw DataError("time exceeds the last cutpoint");
    for (int j = 0; j <= last; ++j) {
      const double hazard = std::exp(log_baseline[j] + eta(static_cast<Eigen::Index>(i)));
      ll -= hazard * (std::min(kappa[j + 1], t) - kappa[j]);
    }
    if (events[i]) ll += log_baseline[last] + eta(static_cast<Eigen::Index>(i));
  }
  return ll;
}

/// Poisson log-likelihood of the expanded data, with the parameter-free term
/// sum(delta * log offset) removed so that it equals the survival likelihood.
inline double pem_poisson_log_likelihood(const PemDataset& ds, const Eigen::VectorXd& eta_rows) {
  const Eigen::VectorXd lo = ds.log_offset();
  const double ll = log_likelihood(Family::poisson, eta_rows + lo, ds.delta);
  return ll - ds.delta.dot(lo);
}

/// Total predictive deviance of a PEM: -2 sum delta (log lambda_j + eta) - o lambda_j exp(eta).
inline double pem_predictive_deviance(const PemDataset& ds, const std::vector<double>& baseline_hazard,
                                      const Eigen::VectorXd& eta_rows) {
  if (static_cast<int>(baseline_hazard.size()) != ds.num_intervals())
    throw InvalidArgument("one baseline hazard per interval");
  double s = 0.0;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    const double lam = baseline_hazard[ds.interval[r]];
    const double h = ds.offset(r) * lam * std::exp(eta_rows(r));
    s += (ds.delta(r) > 0 ? std::log(lam) + eta_rows(r) : 0.0) - h;
  }
  return -2.0 * s;
}

/// Piecewise-constant hazard survival times, censored uniformly on (0, tmax].
struct SurvivalSample {
  std::vector<double> times;
  std::vector<bool> events;
  Eigen::MatrixXd X;
  Eigen::VectorXd eta;
};

inline SurvivalSample simulate_pem(int n, const std::vector<double>& kappa,
                                   const std::vector<double>& log_baseline,
                                   const Eigen::VectorXd& coef, Rng& rng) {
  validate_cutpoints(kappa);
  if (log_baseline.size() + 1 != kappa.size()) throw InvalidArgument("one baseline per interval");
  SurvivalSample s;
  s.X.resize(n, coef.size());
  for (int i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < coef.size(); ++k) s.X(i, k) = rng.normal();
  s.eta = s.X * coef;
  const double tmax = kappa.back();
  for (int i = 0; i < n; ++i) {
    // inversion of the cumulative hazard
    double e = -std::log(1.0 - rng.uniform());
    double t = tmax;
    bool event = false;
    for (std::size_t j = 0; j + 1 < kappa.size(); ++j) {
      const double h = std::exp(log_baseline[j] + s.eta(i));
      const double len = kappa[j + 1] - kappa[j];
      if (e <= h * len) {
        t = kappa[j] + e / h;
        event = true;
        break;
      }
      e -= h * len;
    }
    const double c = rng.uniform(0.0, tmax);
    if (c < t) {
      t = c;
      event = false;
    }
    if (!(t > 0.0)) t = std::numeric_limits<double>::min();
    s.times.push_back(t);
    s.events.push_back(event);
  }
  return s;
}

}  // namespace starsel

#endif  // STARSEL_SIMLAB_HPP
