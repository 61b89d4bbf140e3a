#ifndef STARSEL_TERMS_HPP
#define STARSEL_TERMS_HPP

// Raw design matrices Z and scaled precision matrices P for the supported
// model term types: P-splines, tensor product P-splines, Gaussian Markov
// random fields, i.i.d. random intercepts and varying coefficients.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "starsel/error.hpp"

namespace starsel {

enum class TermKind {
  linear,
  pspline,
  mrf,
  random_intercept,
  varying_coefficient,
  tensor_spline
};

inline std::string to_string(TermKind kind) {
  switch (kind) {
    case TermKind::linear: return "linear";
    case TermKind::pspline: return "pspline";
    case TermKind::mrf: return "mrf";
    case TermKind::random_intercept: return "random_intercept";
    case TermKind::varying_coefficient: return "varying_coefficient";
    case TermKind::tensor_spline: return "tensor_spline";
  }
  return "unknown";
}

inline std::optional<TermKind> term_kind_from_string(const std::string& s) {
  static const std::map<std::string, TermKind> kinds{
      {"linear", TermKind::linear},
      {"pspline", TermKind::pspline},
      {"mrf", TermKind::mrf},
      {"random_intercept", TermKind::random_intercept},
      {"varying_coefficient", TermKind::varying_coefficient},
      {"tensor_spline", TermKind::tensor_spline}};
  auto it = kinds.find(s);
  if (it == kinds.end()) return std::nullopt;
  return it->second;
}

/// Declarative description of one model term.
///
/// `covariates` holds column names: one for linear/pspline/mrf/random
/// intercept terms, two for tensor splines (xa, xb) and for varying
/// coefficients (the effect modifier's argument first, then the modulating
/// covariate u).
struct TermSpec {
  std::string label;
  TermKind kind = TermKind::pspline;
  std::vector<std::string> covariates;
  std::optional<int> num_basis;       // 20 for splines, 8 per margin for tensors
  int spline_degree = 3;
  std::optional<int> penalty_order;   // 2 for splines, 1 for MRFs
  std::string neighbors = "path";     // mrf: "path" or a CSV adjacency file
  TermKind base = TermKind::pspline;  // varying_coefficient: pspline or mrf
  bool selectable = true;
  bool expanded = true;  // false: plain NMIG prior without parameter expansion

  int effective_num_basis() const {
    if (num_basis) return *num_basis;
    return kind == TermKind::tensor_spline ? 8 : 20;
  }

  int effective_penalty_order() const {
    if (penalty_order) return *penalty_order;
    const bool mrf_like = kind == TermKind::mrf ||
                          (kind == TermKind::varying_coefficient &&
                           base == TermKind::mrf);
    return mrf_like ? 1 : 2;
  }

  std::size_t expected_covariates() const {
    return (kind == TermKind::tensor_spline ||
            kind == TermKind::varying_coefficient)
               ? 2
               : 1;
  }

  void validate() const {
    if (label.empty()) throw InvalidArgument("term label must not be empty");
    if (covariates.size() != expected_covariates())
      throw InvalidArgument("term '" + label + "' expects " +
                            std::to_string(expected_covariates()) +
                            " covariate(s)");
    const int nb = effective_num_basis();
    if (spline_degree < 0)
      throw InvalidArgument("term '" + label + "': negative spline degree");
    const bool spline_like =
        kind == TermKind::pspline || kind == TermKind::tensor_spline ||
        (kind == TermKind::varying_coefficient && base == TermKind::pspline);
    if (spline_like) {
      if (nb <= spline_degree + 1)
        throw InvalidArgument("term '" + label +
                              "': num_basis must exceed spline_degree + 1");
      const int k = effective_penalty_order();
      if (k < 1 || k >= nb)
        throw InvalidArgument("term '" + label +
                              "': penalty order must satisfy 1 <= k < num_basis");
    }
    if (kind == TermKind::varying_coefficient && base != TermKind::pspline &&
        base != TermKind::mrf)
      throw InvalidArgument("term '" + label +
                            "': varying coefficient base must be pspline or mrf");
    if (!expanded && !selectable)
      throw InvalidArgument("term '" + label +
                            "': plain NMIG only applies to selectable terms");
  }

  friend bool operator==(const TermSpec&, const TermSpec&) = default;
};

/// A term's raw design and penalty before reparameterization.
struct RawTerm {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd P;
  int null_dim = 0;
};

/// Relative threshold below which eigenvalues of a penalty count as zero.
inline constexpr double kPenaltyRankTolerance = 1e-10;

/// Number of eigenvalues of symmetric P below 1e-10 * lambda_max.
inline int null_space_dimension(const Eigen::MatrixXd& P) {
  if (P.rows() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double lmax = ev.cwiseAbs().maxCoeff();
  if (lmax <= 0.0) return static_cast<int>(P.rows());
  const double tol = kPenaltyRankTolerance * lmax;
  return static_cast<int>((ev.array() < tol).count());
}

inline RawTerm make_raw_term(Eigen::MatrixXd Z, Eigen::MatrixXd P) {
  if (P.rows() != P.cols() || P.rows() != Z.cols())
    throw InvalidArgument("penalty dimension does not match design columns");
  if (!P.isApprox(P.transpose(), 1e-12) && (P - P.transpose()).norm() > 1e-12)
    throw InvalidArgument("penalty matrix must be symmetric");
  RawTerm t{std::move(Z), std::move(P), 0};
  t.null_dim = null_space_dimension(t.P);
  return t;
}

/// B-spline basis on equidistant knots spanning the observed covariate range,
/// with `degree` exterior knots on each side.
class BSplineBasis {
 public:
  BSplineBasis(const Eigen::VectorXd& x, int num_basis, int degree)
      : num_basis_(num_basis), degree_(degree) {
    if (degree < 0) throw InvalidArgument("spline degree must be non-negative");
    if (num_basis <= degree + 1)
      throw InvalidArgument("num_basis must exceed degree + 1");
    if (x.size() == 0) throw DegenerateBasis("empty covariate");
    if (!x.allFinite()) throw InvalidArgument("covariate contains non-finite values");
    std::set<double> distinct(x.data(), x.data() + x.size());
    if (static_cast<int>(distinct.size()) < num_basis)
      throw DegenerateBasis("covariate has " + std::to_string(distinct.size()) +
                            " distinct values, fewer than num_basis = " +
                            std::to_string(num_basis));
    lo_ = *distinct.begin();
    hi_ = *distinct.rbegin();
    const int intervals = num_basis - degree;
    h_ = (hi_ - lo_) / intervals;
    knots_.resize(num_basis + degree + 1);
    for (int k = 0; k < static_cast<int>(knots_.size()); ++k)
      knots_[k] = lo_ + (k - degree) * h_;
  }

  int num_basis() const { return num_basis_; }
  int degree() const { return degree_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }
  const std::vector<double>& knots() const { return knots_; }

  /// Evaluates the basis; values outside the training range are clamped to it.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(x.size(), num_basis_);
    std::vector<double> N(degree_ + 1), left(degree_ + 1), right(degree_ + 1);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x(i)))
        throw InvalidArgument("covariate contains non-finite values");
      const double xi = std::clamp(x(i), lo_, hi_);
      int span = degree_ + static_cast<int>(std::floor((xi - lo_) / h_));
      span = std::clamp(span, degree_, num_basis_ - 1);
      // Cox-de Boor recursion for the degree+1 nonzero functions.
      N[0] = 1.0;
      for (int j = 1; j <= degree_; ++j) {
        left[j] = xi - knots_[span + 1 - j];
        right[j] = knots_[span + j] - xi;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
          const double temp = N[r] / (right[r + 1] + left[j - r]);
          N[r] = saved + right[r + 1] * temp;
          saved = left[j - r] * temp;
        }
        N[j] = saved;
      }
      for (int r = 0; r <= degree_; ++r) B(i, span - degree_ + r) = N[r];
    }
    return B;
  }

 private:
  int num_basis_;
  int degree_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double h_ = 1.0;
  std::vector<double> knots_;
};

inline Eigen::MatrixXd bspline_design(const Eigen::VectorXd& x, int num_basis,
                                      int degree) {
  return BSplineBasis(x, num_basis, degree).evaluate(x);
}

/// k-th order difference operator, (dim - k) x dim.
inline Eigen::MatrixXd difference_matrix(int order, int dim) {
  if (order < 1 || order >= dim)
    throw InvalidArgument("difference order k must satisfy 1 <= k < D (k=" +
                          std::to_string(order) + ", D=" + std::to_string(dim) +
                          ")");
  Eigen::MatrixXd Dm = Eigen::MatrixXd::Identity(dim, dim);
  for (int k = 0; k < order; ++k) {
    Eigen::MatrixXd next(Dm.rows() - 1, dim);
    for (Eigen::Index r = 0; r + 1 < Dm.rows(); ++r)
      next.row(r) = Dm.row(r + 1) - Dm.row(r);
    Dm = std::move(next);
  }
  return Dm;
}

/// Random-walk penalty Delta_k' Delta_k.
inline Eigen::MatrixXd difference_penalty(int order, int dim) {
  const Eigen::MatrixXd Dm = difference_matrix(order, dim);
  return Dm.transpose() * Dm;
}

inline int connected_components(const Eigen::MatrixXd& adjacency) {
  const Eigen::Index R = adjacency.rows();
  std::vector<int> comp(R, -1);
  int ncomp = 0;
  for (Eigen::Index s = 0; s < R; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<Eigen::Index> stack{s};
    comp[s] = ncomp;
    while (!stack.empty()) {
      const Eigen::Index v = stack.back();
      stack.pop_back();
      for (Eigen::Index u = 0; u < R; ++u)
        if (adjacency(v, u) != 0.0 && comp[u] < 0) {
          comp[u] = ncomp;
          stack.push_back(u);
        }
    }
    ++ncomp;
  }
  return ncomp;
}

/// Intrinsic GMRF precision diag(degrees) - adjacency.
inline Eigen::MatrixXd mrf_precision(const Eigen::MatrixXd& adjacency) {
  if (adjacency.rows() != adjacency.cols() || adjacency.rows() == 0)
    throw InvalidArgument("adjacency must be a non-empty square matrix");
  const Eigen::Index R = adjacency.rows();
  bool any_edge = false;
  for (Eigen::Index i = 0; i < R; ++i) {
    if (adjacency(i, i) != 0.0)
      throw InvalidArgument("adjacency must have a zero diagonal");
    for (Eigen::Index j = 0; j < R; ++j) {
      const double a = adjacency(i, j);
      if (a != 0.0 && a != 1.0)
        throw InvalidArgument("adjacency entries must be 0 or 1");
      if (a != adjacency(j, i)) throw InvalidArgument("adjacency must be symmetric");
      any_edge = any_edge || a != 0.0;
    }
  }
  if (!any_edge) throw InvalidArgument("adjacency graph has no edges");
  Eigen::MatrixXd P = -adjacency;
  P.diagonal() = adjacency.rowwise().sum();
  return P;
}

/// Adjacency of the path graph 1 - 2 - ... - R.
inline Eigen::MatrixXd path_adjacency(int R) {
  if (R < 2) throw InvalidArgument("path graph needs at least two nodes");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(R, R);
  for (int i = 0; i + 1 < R; ++i) A(i, i + 1) = A(i + 1, i) = 1.0;
  return A;
}

/// Sorted distinct levels of a factor.
inline std::vector<std::string> factor_levels(const std::vector<std::string>& values) {
  std::set<std::string> s(values.begin(), values.end());
  return {s.begin(), s.end()};
}

/// n x G indicator coding of `values` against `levels`; unknown levels give
/// all-zero rows.
inline Eigen::MatrixXd indicator_matrix(const std::vector<std::string>& values,
                                        const std::vector<std::string>& levels) {
  std::map<std::string, Eigen::Index> index;
  for (std::size_t g = 0; g < levels.size(); ++g)
    index[levels[g]] = static_cast<Eigen::Index>(g);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(values.size(), levels.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto it = index.find(values[i]);
    if (it != index.end()) Z(static_cast<Eigen::Index>(i), it->second) = 1.0;
  }
  return Z;
}

inline RawTerm random_intercept_design(const std::vector<std::string>& groups) {
  const auto levels = factor_levels(groups);
  if (levels.size() < 2)
    throw InvalidArgument("random intercept needs at least two groups");
  const auto G = static_cast<Eigen::Index>(levels.size());
  return RawTerm{indicator_matrix(groups, levels), Eigen::MatrixXd::Identity(G, G), 0};
}

inline RawTerm varying_coefficient(const Eigen::VectorXd& u, const RawTerm& base) {
  if (u.size() != base.Z.rows())
    throw InvalidArgument("modulating covariate length does not match design rows");
  if (!u.allFinite()) throw InvalidArgument("modulating covariate is not finite");
  return RawTerm{u.asDiagonal() * base.Z, base.P, base.null_dim};
}

/// Row-wise Kronecker product: row i is kron(A.row(i), B.row(i)).
inline Eigen::MatrixXd row_kronecker(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != B.rows()) throw InvalidArgument("row counts differ");
  Eigen::MatrixXd C(A.rows(), A.cols() * B.cols());
  for (Eigen::Index a = 0; a < A.cols(); ++a)
    for (Eigen::Index b = 0; b < B.cols(); ++b)
      C.col(a * B.cols() + b) = A.col(a).cwiseProduct(B.col(b));
  return C;
}

inline Eigen::MatrixXd kronecker(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

/// Kronecker-sum penalty P_a (x) I_b + I_a (x) P_b.
inline Eigen::MatrixXd tensor_penalty(const Eigen::MatrixXd& Pa, const Eigen::MatrixXd& Pb) {
  const Eigen::MatrixXd Ia = Eigen::MatrixXd::Identity(Pa.rows(), Pa.rows());
  const Eigen::MatrixXd Ib = Eigen::MatrixXd::Identity(Pb.rows(), Pb.rows());
  return kronecker(Pa, Ib) + kronecker(Ia, Pb);
}

inline RawTerm tensor_spline(const Eigen::VectorXd& xa, const Eigen::VectorXd& xb,
                             int num_basis_a, int num_basis_b, int degree = 3,
                             int order = 2) {
  const Eigen::MatrixXd Ba = bspline_design(xa, num_basis_a, degree);
  const Eigen::MatrixXd Bb = bspline_design(xb, num_basis_b, degree);
  return make_raw_term(row_kronecker(Ba, Bb),
                       tensor_penalty(difference_penalty(order, num_basis_a),
                                      difference_penalty(order, num_basis_b)));
}

inline RawTerm pspline_term(const Eigen::VectorXd& x, int num_basis = 20,
                            int degree = 3, int order = 2) {
  return make_raw_term(bspline_design(x, num_basis, degree),
                       difference_penalty(order, num_basis));
}

}  // namespace starsel

#endif  // STARSEL_TERMS_HPP
