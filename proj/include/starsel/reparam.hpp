#ifndef STARSEL_REPARAM_HPP
#define STARSEL_REPARAM_HPP

// Splits a raw term into an unpenalized null-space block X0 and a penalized
// block X_pen whose coefficients have an i.i.d. standard Gaussian prior.

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "starsel/error.hpp"
#include "starsel/terms.hpp"

namespace starsel {

enum class BlockKind { null_space, penalized, unpenalized_plain };

inline std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::null_space: return "null_space";
    case BlockKind::penalized: return "penalized";
    case BlockKind::unpenalized_plain: return "unpenalized_plain";
  }
  return "unknown";
}

/// A selectable coefficient block. The block design is an affine image of the
/// parent term's raw design, X = Z * transform + 1 * shift', which lets the
/// block be re-evaluated on new covariate values.
struct DesignBlock {
  std::string label;
  Eigen::MatrixXd X;
  BlockKind kind = BlockKind::penalized;
  bool selectable = true;
  bool expanded = true;
  int parent_term = -1;
  std::string parent_label;
  Eigen::MatrixXd transform;
  Eigen::VectorXd shift;
  int pre_truncation_rank = 0;

  Eigen::Index dim() const { return X.cols(); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& Z) const {
    if (Z.cols() != transform.rows())
      throw InvalidArgument("raw design has wrong column count for block " + label);
    Eigen::MatrixXd out = Z * transform;
    out.rowwise() += shift.transpose();
    return out;
  }

  void scale_by(double c) {
    X *= c;
    transform *= c;
    shift *= c;
  }
};

struct DecomposeOptions {
  double coverage = 0.995;
  /// Also project X_pen off span{1, Z null(P)} so that the penalized block is
  /// centered and orthogonal to X0.
  bool project_out_null = false;
};

struct Decomposition {
  std::optional<DesignBlock> X0;
  std::optional<DesignBlock> Xpen;
  Eigen::VectorXd eigenvalues;  // nonzero spectrum of Z P^- Z', descending
  int pre_truncation_rank = 0;
  int dropped_constant_columns = 0;
  double retained_fraction = 0.0;
};

/// Smallest d whose leading eigenvalues carry at least `coverage` of the total.
inline int truncation_rank(const Eigen::VectorXd& eigenvalues, double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0))
    throw InvalidArgument("coverage must lie in (0, 1]");
  if (eigenvalues.size() == 0) throw InvalidArgument("no eigenvalues to truncate");
  const double total = eigenvalues.sum();
  const double scale = eigenvalues.cwiseAbs().maxCoeff();
  if (!(total > 0.0)) throw InvalidArgument("all eigenvalues are zero");
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues(i) < -1e-12 * scale) throw InvalidArgument("negative eigenvalue");
    if (i > 0 && eigenvalues(i) > eigenvalues(i - 1) + 1e-12 * scale)
      throw InvalidArgument("eigenvalues must be sorted in descending order");
  }
  const double target = coverage * total - 1e-12 * total;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    cum += eigenvalues(i);
    if (cum >= target) return static_cast<int>(i + 1);
  }
  return static_cast<int>(eigenvalues.size());
}

namespace detail {

// Coefficient direction 0, 1, ..., D-1; for spline bases its image is
// increasing in the covariate, which fixes the sign of linear-trend columns.
inline Eigen::VectorXd ramp(Eigen::Index D) {
  return Eigen::VectorXd::LinSpaced(D, 0.0, static_cast<double>(D - 1));
}

}  // namespace detail

inline Decomposition decompose(const RawTerm& term, const DecomposeOptions& opt = {}) {
  const Eigen::MatrixXd& Z = term.Z;
  const Eigen::Index n = Z.rows(), D = Z.cols();
  if (term.P.rows() != D || term.P.cols() != D)
    throw InvalidArgument("penalty does not match raw design");
  if (!Z.allFinite()) throw InvalidArgument("raw design contains non-finite values");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(term.P);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lmax = lam.cwiseAbs().maxCoeff();
  const double tol = kPenaltyRankTolerance * lmax;
  std::vector<Eigen::Index> null_idx, pos_idx;
  for (Eigen::Index i = 0; i < D; ++i)
    (lmax > 0.0 && lam(i) > tol ? pos_idx : null_idx).push_back(i);
  const auto K = static_cast<Eigen::Index>(null_idx.size());
  const auto r = static_cast<Eigen::Index>(pos_idx.size());
  if (n < r) throw InvalidArgument("fewer observations than penalty rank");

  Eigen::MatrixXd Q0(D, K), Qp(D, r);
  Eigen::VectorXd lp(r);
  for (Eigen::Index j = 0; j < K; ++j) Q0.col(j) = es.eigenvectors().col(null_idx[j]);
  for (Eigen::Index j = 0; j < r; ++j) {
    Qp.col(j) = es.eigenvectors().col(pos_idx[j]);
    lp(j) = lam(pos_idx[j]);
  }

  Decomposition out;
  const Eigen::MatrixXd N = Z * Q0;

  // Null-space image with the constant direction removed.
  if (K > 0) {
    const Eigen::RowVectorXd mean = N.colwise().mean();
    const Eigen::MatrixXd Nc = N.rowwise() - mean;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Nc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double stol = 1e-12 * std::max(1.0, N.norm());
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > stol) ++rank;
    out.dropped_constant_columns = static_cast<int>(K - rank);
    if (rank > 0) {
      DesignBlock b;
      b.kind = BlockKind::null_space;
      b.X = svd.matrixU().leftCols(rank);
      Eigen::MatrixXd L = Q0 * svd.matrixV().leftCols(rank) *
                          s.head(rank).cwiseInverse().asDiagonal();
      Eigen::VectorXd sh = -(mean * svd.matrixV().leftCols(rank) *
                             s.head(rank).cwiseInverse().asDiagonal())
                                .transpose();
      const Eigen::VectorXd ref = Z * detail::ramp(D);
      for (Eigen::Index j = 0; j < rank; ++j)
        if (b.X.col(j).dot(ref) < 0.0) {
          b.X.col(j) *= -1.0;
          L.col(j) *= -1.0;
          sh(j) *= -1.0;
        }
      b.transform = std::move(L);
      b.shift = std::move(sh);
      b.pre_truncation_rank = static_cast<int>(rank);
      out.X0 = std::move(b);
    }
  }

  if (r == 0) {
    if (!out.X0) throw DegenerateBasis("term has neither a penalized part nor a null space");
    return out;
  }

  // A A' = Z P^- Z' with A = Z Q+ Lambda+^{-1/2}.
  Eigen::MatrixXd T = Qp * lp.cwiseSqrt().cwiseInverse().asDiagonal();
  Eigen::MatrixXd A = Z * T;
  Eigen::VectorXd shift_pre = Eigen::VectorXd::Zero(r);
  if (opt.project_out_null) {
    Eigen::MatrixXd B(n, K + 1);
    B.col(0).setOnes();
    B.rightCols(K) = N;
    // B is rank deficient (Z null(P) contains the constant); use a
    // rank-truncated pseudo-inverse so that B C is the exact projection.
    Eigen::JacobiSVD<Eigen::MatrixXd> bsvd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& bs = bsvd.singularValues();
    Eigen::Index br = 0;
    while (br < bs.size() && bs(br) > 1e-10 * bs(0)) ++br;
    const Eigen::MatrixXd C = bsvd.matrixV().leftCols(br) *
                              bs.head(br).cwiseInverse().asDiagonal() *
                              bsvd.matrixU().leftCols(br).transpose() * A;
    A -= B * C;
    T -= Q0 * C.bottomRows(K);
    shift_pre = -C.row(0).transpose();
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  Eigen::VectorXd ev = s.array().square();
  const double evtol = 1e-12 * (ev.size() ? ev(0) : 0.0);
  Eigen::Index nz = 0;
  while (nz < ev.size() && ev(nz) > evtol) ++nz;
  if (nz == 0) {
    if (!out.X0) throw DegenerateBasis("penalized part of term vanishes");
    return out;
  }
  out.eigenvalues = ev.head(nz);
  out.pre_truncation_rank = static_cast<int>(nz);
  const int d = truncation_rank(out.eigenvalues, opt.coverage);
  out.retained_fraction = out.eigenvalues.head(d).sum() / out.eigenvalues.sum();

  DesignBlock b;
  b.kind = BlockKind::penalized;
  b.X = svd.matrixU().leftCols(d) * s.head(d).asDiagonal();
  const Eigen::MatrixXd Wd = svd.matrixV().leftCols(d);
  b.transform = T * Wd;
  b.shift = Wd.transpose() * shift_pre;
  b.pre_truncation_rank = static_cast<int>(nz);
  out.Xpen = std::move(b);
  return out;
}

/// Moore-Penrose inverse of a symmetric PSD matrix with the penalty-rank
/// tolerance applied to its spectrum.
inline Eigen::MatrixXd psd_pseudo_inverse(const Eigen::MatrixXd& P) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double tol = kPenaltyRankTolerance * lam.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(i) > tol) inv(i) = 1.0 / lam(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace starsel

#endif  // STARSEL_REPARAM_HPP
