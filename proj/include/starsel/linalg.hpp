#ifndef STARSEL_LINALG_HPP
#define STARSEL_LINALG_HPP

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "starsel/error.hpp"
#include "starsel/random.hpp"

namespace starsel {

enum class FactorMethod { cholesky, qr };

/// Gaussian linear-model subproblem with diagonal prior precision:
///   minimize  sum_i w_i (z_i - A_i c)^2 + sum_k p_k (c_k - mu_k)^2
/// The corresponding Gaussian has precision A' W A + diag(p) and mean at the
/// minimizer.
struct WeightedProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd weights;     // w_i > 0, length n
  Eigen::VectorXd response;    // z, length n
  Eigen::VectorXd prior_mean;  // mu, length k
  Eigen::VectorXd prior_prec;  // p, length k
};

/// N(mean, R^{-1} R^{-T}) with upper-triangular factor R of the precision.
class CanonicalGaussian {
 public:
  static CanonicalGaussian from_problem(const WeightedProblem& prob,
                                        FactorMethod method = FactorMethod::cholesky) {
    check(prob);
    return method == FactorMethod::qr ? from_qr(prob) : from_cholesky(prob);
  }

  /// From precision Q and canonical vector b (mean = Q^{-1} b).
  static CanonicalGaussian from_precision(const Eigen::MatrixXd& Q, const Eigen::VectorXd& b) {
    CanonicalGaussian g;
    g.R_ = cholesky_upper(Q);
    g.mean_ = solve_normal(g.R_, b);
    return g;
  }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& factor() const { return R_; }
  Eigen::Index dim() const { return mean_.size(); }

  Eigen::VectorXd draw(Rng& rng) const {
    const Eigen::VectorXd z = rng.normal_vector(dim());
    return mean_ + R_.triangularView<Eigen::Upper>().solve(z);
  }

  double log_density(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd r = R_.triangularView<Eigen::Upper>() * (x - mean_);
    return -0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi) +
           R_.diagonal().array().abs().log().sum() - 0.5 * r.squaredNorm();
  }

  Eigen::MatrixXd precision() const { return R_.transpose() * R_; }

 private:
  Eigen::MatrixXd R_;
  Eigen::VectorXd mean_;

  static void check(const WeightedProblem& p) {
    const Eigen::Index n = p.A.rows(), k = p.A.cols();
    if (p.weights.size() != n || p.response.size() != n || p.prior_mean.size() != k ||
        p.prior_prec.size() != k)
      throw InvalidArgument("weighted problem dimensions disagree");
    if (!p.weights.allFinite() || !p.response.allFinite() || !p.A.allFinite())
      throw SamplerError("non-finite working weights or responses");
    if ((p.weights.array() < 0.0).any() || (p.prior_prec.array() < 0.0).any())
      throw SamplerError("negative weights in Gaussian update");
  }

  /// Upper factor R with R'R = Q; retries once with 1e-10 * trace jitter.
  static Eigen::MatrixXd cholesky_upper(const Eigen::MatrixXd& Q) {
    Eigen::LLT<Eigen::MatrixXd> llt(Q);
    if (llt.info() != Eigen::Success) {
      Eigen::MatrixXd Qj = Q;
      Qj.diagonal().array() += 1e-10 * Q.trace();
      llt.compute(Qj);
      if (llt.info() != Eigen::Success)
        throw SamplerError("precision matrix is not positive definite");
    }
    return llt.matrixU();
  }

  static Eigen::VectorXd solve_normal(const Eigen::MatrixXd& R, const Eigen::VectorXd& b) {
    const Eigen::VectorXd y = R.transpose().triangularView<Eigen::Lower>().solve(b);
    return R.triangularView<Eigen::Upper>().solve(y);
  }

  static CanonicalGaussian from_cholesky(const WeightedProblem& p) {
    const Eigen::MatrixXd WA = p.weights.asDiagonal() * p.A;
    Eigen::MatrixXd Q = p.A.transpose() * WA;
    Q.diagonal() += p.prior_prec;
    const Eigen::VectorXd b = WA.transpose() * p.response +
                              p.prior_prec.cwiseProduct(p.prior_mean);
    return from_precision(Q, b);
  }

  static CanonicalGaussian from_qr(const WeightedProblem& p) {
    const Eigen::Index n = p.A.rows(), k = p.A.cols();
    Eigen::MatrixXd M(n + k, k);
    Eigen::VectorXd r(n + k);
    const Eigen::VectorXd sw = p.weights.cwiseSqrt();
    const Eigen::VectorXd sp = p.prior_prec.cwiseSqrt();
    M.topRows(n) = sw.asDiagonal() * p.A;
    M.bottomRows(k) = sp.asDiagonal().toDenseMatrix();
    r.head(n) = sw.cwiseProduct(p.response);
    r.tail(k) = sp.cwiseProduct(p.prior_mean);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qtr = (qr.householderQ().transpose() * r).head(k);
    // Normalize to a positive diagonal so QR and Cholesky factors coincide.
    Eigen::VectorXd rhs = qtr;
    for (Eigen::Index i = 0; i < k; ++i)
      if (R(i, i) < 0.0) {
        R.row(i) *= -1.0;
        rhs(i) *= -1.0;
      }
    if ((R.diagonal().array().abs() <= 1e-300).any())
      throw SamplerError("rank-deficient Gaussian update");
    CanonicalGaussian g;
    g.R_ = std::move(R);
    g.mean_ = g.R_.triangularView<Eigen::Upper>().solve(rhs);
    return g;
  }
};

}  // namespace starsel

#endif  // STARSEL_LINALG_HPP
