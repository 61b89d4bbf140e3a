#ifndef STARSEL_MODEL_HPP
#define STARSEL_MODEL_HPP

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "starsel/error.hpp"
#include "starsel/reparam.hpp"

namespace starsel {

enum class Family { gaussian, binomial_logit, poisson };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::binomial_logit: return "binomial";
    case Family::poisson: return "poisson";
  }
  return "unknown";
}

inline std::optional<Family> family_from_string(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "binomial" || s == "binomial_logit" || s == "logit") return Family::binomial_logit;
  if (s == "poisson") return Family::poisson;
  return std::nullopt;
}

inline void validate_response(Family f, const Eigen::VectorXd& y) {
  if (!y.allFinite()) throw DataError("response contains non-finite values");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y(i);
    if (f == Family::binomial_logit && v != 0.0 && v != 1.0)
      throw DataError("binomial response must be 0/1 (row " + std::to_string(i + 1) + ")");
    if (f == Family::poisson && (v < 0.0 || v != std::floor(v)))
      throw DataError("poisson response must be a non-negative integer (row " +
                      std::to_string(i + 1) + ")");
  }
}

struct Hyperparams {
  double a_tau = 5.0;
  double b_tau = 25.0;
  double v0 = 0.00025;
  double a_w = 1.0;
  double b_w = 1.0;
  double a_sigma = 1e-4;
  double b_sigma = 1e-4;
  double fixed_prior_var = 1e6;  // flat Gaussian prior on unselected coefficients

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw InvalidArgument(std::string(name) + " must be positive");
    };
    positive(a_tau, "a_tau");
    positive(b_tau, "b_tau");
    positive(a_w, "a_w");
    positive(b_w, "b_w");
    positive(a_sigma, "a_sigma");
    positive(b_sigma, "b_sigma");
    positive(fixed_prior_var, "fixed_prior_var");
    if (!(v0 > 0.0 && v0 < 1.0)) throw InvalidArgument("v0 must lie in (0, 1)");
  }

  /// Coded warnings for legal but questionable settings.
  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (b_tau / a_tau <= 1.0)
      w.push_back("W004 b_tau/a_tau <= 1: slab variance mode is not well above 1");
    return w;
  }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct ModelSpec {
  Family family = Family::gaussian;
  std::vector<DesignBlock> blocks;
  Eigen::MatrixXd fixed_design;  // first column is the intercept
  std::vector<std::string> fixed_labels;
  Eigen::VectorXd offsets;
  Eigen::VectorXd y;
  Hyperparams hyper;

  Eigen::Index n() const { return fixed_design.rows(); }
  Eigen::Index p() const { return static_cast<Eigen::Index>(blocks.size()); }
  Eigen::Index q() const {
    Eigen::Index s = 0;
    for (const auto& b : blocks) s += b.dim();
    return s;
  }

  /// Start index of each block inside the stacked coefficient vector.
  std::vector<Eigen::Index> block_offsets() const {
    std::vector<Eigen::Index> off;
    Eigen::Index s = 0;
    for (const auto& b : blocks) {
      off.push_back(s);
      s += b.dim();
    }
    return off;
  }

  void validate() const {
    hyper.validate();
    const Eigen::Index nn = n();
    if (nn == 0) throw InvalidArgument("model has no observations");
    if (fixed_design.cols() == 0 || !(fixed_design.col(0).array() == 1.0).all())
      throw InvalidArgument("fixed design must start with an intercept column");
    if (y.size() != nn || offsets.size() != nn)
      throw InvalidArgument("response/offset length does not match the design");
    for (const auto& b : blocks) {
      if (b.X.rows() != nn)
        throw InvalidArgument("block '" + b.label + "' has wrong number of rows");
      if (b.dim() == 0) throw InvalidArgument("block '" + b.label + "' is empty");
    }
    validate_response(family, y);
  }
};

struct PeNMIGState {
  Eigen::VectorXd alpha;  // p
  Eigen::VectorXd xi;     // q
  Eigen::VectorXd m;      // q, entries +-1
  Eigen::VectorXd gamma;  // p, entries v0 or 1
  Eigen::VectorXd tau2;   // p
  double w = 0.5;
  double sigma2 = 1.0;
  Eigen::VectorXd theta;  // fixed-part coefficients
  Eigen::VectorXd eta;    // cached linear predictor
};

inline void check_state(const ModelSpec& spec, const PeNMIGState& s) {
  if (s.alpha.size() != spec.p() || s.gamma.size() != spec.p() || s.tau2.size() != spec.p() ||
      s.xi.size() != spec.q() || s.m.size() != spec.q() ||
      s.theta.size() != spec.fixed_design.cols())
    throw InvalidArgument("state dimensions do not match the model");
}

/// Stacked beta = blockdiag(xi_1, ..., xi_p) alpha.
inline Eigen::VectorXd stacked_beta(const ModelSpec& spec, const PeNMIGState& s) {
  check_state(spec, s);
  Eigen::VectorXd beta(spec.q());
  const auto off = spec.block_offsets();
  for (Eigen::Index j = 0; j < spec.p(); ++j) {
    const Eigen::Index d = spec.blocks[j].dim();
    beta.segment(off[j], d) = s.alpha(j) * s.xi.segment(off[j], d);
  }
  return beta;
}

inline Eigen::VectorXd assemble_predictor(const ModelSpec& spec, const PeNMIGState& s) {
  check_state(spec, s);
  Eigen::VectorXd eta = spec.fixed_design * s.theta + spec.offsets;
  const auto off = spec.block_offsets();
  for (Eigen::Index j = 0; j < spec.p(); ++j) {
    const auto& b = spec.blocks[j];
    eta.noalias() += b.X * (s.alpha(j) * s.xi.segment(off[j], b.dim()));
  }
  return eta;
}

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double log_likelihood(Family family, const Eigen::VectorXd& eta,
                             const Eigen::VectorXd& y, double sigma2 = 1.0) {
  if (eta.size() != y.size()) throw InvalidArgument("eta and y differ in length");
  if (!eta.allFinite()) throw SamplerError("non-finite linear predictor");
  const auto n = static_cast<double>(y.size());
  double ll = 0.0;
  switch (family) {
    case Family::gaussian:
      if (!(sigma2 > 0.0)) throw InvalidArgument("sigma2 must be positive");
      ll = -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2) -
           (y - eta).squaredNorm() / (2.0 * sigma2);
      break;
    case Family::binomial_logit:
      for (Eigen::Index i = 0; i < y.size(); ++i) ll += y(i) * eta(i) - log1p_exp(eta(i));
      break;
    case Family::poisson:
      for (Eigen::Index i = 0; i < y.size(); ++i)
        ll += y(i) * eta(i) - std::exp(eta(i)) - std::lgamma(y(i) + 1.0);
      break;
  }
  return ll;
}

inline double log_likelihood(const ModelSpec& spec, const Eigen::VectorXd& eta,
                             const Eigen::VectorXd& y, double sigma2) {
  return log_likelihood(spec.family, eta, y, sigma2);
}

}  // namespace starsel

#endif  // STARSEL_MODEL_HPP
