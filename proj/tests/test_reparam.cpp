#include <gtest/gtest.h>

#include "starsel/random.hpp"
#include "starsel/reparam.hpp"

using namespace starsel;

namespace {

Eigen::VectorXd uniform_points(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform(-2.0, 2.0);
  return x;
}

// Dense n x n oracle: leading d eigenpairs of M.
Eigen::MatrixXd truncated_reconstruction(const Eigen::MatrixXd& M, int d) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  const Eigen::Index n = M.rows();
  const Eigen::MatrixXd U = es.eigenvectors().rightCols(d);
  const Eigen::VectorXd lam = es.eigenvalues().tail(d);
  (void)n;
  return U * lam.asDiagonal() * U.transpose();
}

}  // namespace

TEST(TruncationRank, WorkedExamples) {
  Eigen::VectorXd a(5);
  a << 4, 3, 2, 0.99, 0.01;
  EXPECT_EQ(truncation_rank(a, 0.995), 4);
  EXPECT_EQ(truncation_rank(Eigen::VectorXd::Ones(1), 0.995), 1);
  Eigen::VectorXd b(2);
  b << 5, 5;
  EXPECT_EQ(truncation_rank(b, 0.5), 1);
  EXPECT_EQ(truncation_rank(b, 1.0), 2);
}

TEST(TruncationRank, Errors) {
  EXPECT_THROW(truncation_rank(Eigen::VectorXd::Zero(3), 0.9), InvalidArgument);
  Eigen::VectorXd asc(2);
  asc << 1, 2;
  EXPECT_THROW(truncation_rank(asc, 0.9), InvalidArgument);
  EXPECT_THROW(truncation_rank(Eigen::VectorXd::Ones(2), 0.0), InvalidArgument);
}

TEST(Decompose, CubicPSplineShape) {
  const RawTerm t = pspline_term(uniform_points(300, 1), 20, 3, 2);
  const Decomposition dec = decompose(t);
  ASSERT_TRUE(dec.X0.has_value());
  ASSERT_TRUE(dec.Xpen.has_value());
  EXPECT_EQ(dec.X0->dim(), 1);
  EXPECT_EQ(dec.dropped_constant_columns, 1);
  EXPECT_EQ(dec.pre_truncation_rank, 18);
  EXPECT_GE(dec.retained_fraction, 0.995);
  // The spectrum of Z P^- Z' decays fast: 0.995 keeps 6 columns here (an
  // independent numpy evaluation gives the same), 0.999 keeps 9.
  EXPECT_EQ(dec.Xpen->dim(), 6);
  EXPECT_EQ(decompose(t, {.coverage = 0.999}).Xpen->dim(), 9);
}

TEST(Decompose, MatchesDenseEigenOracle) {
  const Eigen::VectorXd x = uniform_points(250, 2);
  const RawTerm t = pspline_term(x, 15, 3, 2);
  const Decomposition dec = decompose(t);
  const Eigen::MatrixXd M = t.Z * psd_pseudo_inverse(t.P) * t.Z.transpose();
  const int d = static_cast<int>(dec.Xpen->dim());
  const Eigen::MatrixXd oracle = truncated_reconstruction(M, d);
  const Eigen::MatrixXd& X = dec.Xpen->X;
  EXPECT_LT((X * X.transpose() - oracle).norm(), 1e-8 * oracle.norm());

  // Discarded eigenvalue mass at most 0.5% of the trace.
  EXPECT_LE(M.trace() - oracle.trace(), 0.005 * M.trace() + 1e-10);
  // Dense spectrum agrees with the reduced one.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd top = es.eigenvalues().reverse().head(dec.eigenvalues.size());
  EXPECT_LT((top - dec.eigenvalues).norm(), 1e-8 * top.norm());
}

TEST(Decompose, PenalizedColumnsAreOrthogonalWithEigenvalueNorms) {
  const RawTerm t = pspline_term(uniform_points(300, 3), 20, 3, 2);
  for (bool project : {false, true}) {
    const Decomposition dec = decompose(t, {.coverage = 0.995, .project_out_null = project});
    const Eigen::MatrixXd G = dec.Xpen->X.transpose() * dec.Xpen->X;
    const double scale = G.diagonal().maxCoeff();
    for (Eigen::Index i = 0; i < G.rows(); ++i)
      for (Eigen::Index j = 0; j < G.cols(); ++j)
        if (i != j) EXPECT_LT(std::abs(G(i, j)), 1e-8 * scale);
    if (!project) {
      for (Eigen::Index i = 0; i < G.rows(); ++i)
        EXPECT_NEAR(G(i, i), dec.eigenvalues(i), 1e-8 * scale);
    }
  }
}

TEST(Decompose, ProjectedVariantMatchesProjectedOracle) {
  const Eigen::VectorXd x = uniform_points(200, 4);
  const RawTerm t = pspline_term(x, 12, 3, 2);
  const Decomposition dec = decompose(t, {.coverage = 0.995, .project_out_null = true});
  const Eigen::Index n = x.size();
  Eigen::MatrixXd B(n, 2);
  B.col(0).setOnes();
  B.col(1) = x;
  const Eigen::MatrixXd H = B * (B.transpose() * B).inverse() * B.transpose();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd M =
      (I - H) * t.Z * psd_pseudo_inverse(t.P) * t.Z.transpose() * (I - H);
  const Eigen::MatrixXd oracle = truncated_reconstruction(M, static_cast<int>(dec.Xpen->dim()));
  const Eigen::MatrixXd& X = dec.Xpen->X;
  EXPECT_LT((X * X.transpose() - oracle).norm(), 1e-8 * oracle.norm());
  // Centered and orthogonal to the linear trend.
  EXPECT_LT(X.colwise().sum().norm(), 1e-8 * X.norm());
  EXPECT_LT((dec.X0->X.transpose() * X).norm(), 1e-8 * X.norm());
}

TEST(Decompose, NullSpaceBlockIsCenteredLinearTrend) {
  const Eigen::VectorXd x = uniform_points(300, 5);
  const Decomposition dec = decompose(pspline_term(x, 20, 3, 2));
  const Eigen::VectorXd c = dec.X0->X.col(0);
  EXPECT_NEAR(c.sum(), 0.0, 1e-10);
  EXPECT_NEAR(c.norm(), 1.0, 1e-10);
  const Eigen::VectorXd xc = x.array() - x.mean();
  EXPECT_NEAR(c.dot(xc) / xc.norm(), 1.0, 1e-8);  // positively aligned with x
}

TEST(Decompose, AffineMapReproducesBlocks) {
  const Eigen::VectorXd x = uniform_points(150, 6);
  BSplineBasis basis(x, 12, 3);
  const RawTerm t = make_raw_term(basis.evaluate(x), difference_penalty(2, 12));
  for (bool project : {false, true}) {
    const Decomposition dec = decompose(t, {.coverage = 0.995, .project_out_null = project});
    EXPECT_LT((dec.X0->apply(t.Z) - dec.X0->X).norm(), 1e-9);
    EXPECT_LT((dec.Xpen->apply(t.Z) - dec.Xpen->X).norm(), 1e-9 * dec.Xpen->X.norm());
  }
}

TEST(Decompose, RandomInterceptHasNoNullSpace) {
  std::vector<std::string> g;
  for (int i = 0; i < 60; ++i) g.push_back(std::string(1, static_cast<char>('a' + i % 6)));
  const Decomposition dec = decompose(random_intercept_design(g), {.coverage = 1.0});
  EXPECT_FALSE(dec.X0.has_value());
  EXPECT_EQ(dec.Xpen->dim(), 6);
}

TEST(Decompose, PathMrfDropsConstant) {
  std::vector<std::string> g;
  for (int i = 0; i < 100; ++i) g.push_back(std::to_string(i % 10));
  RawTerm t = random_intercept_design(g);
  t = make_raw_term(t.Z, mrf_precision(path_adjacency(10)));
  const Decomposition dec = decompose(t);
  EXPECT_FALSE(dec.X0.has_value());
  EXPECT_EQ(dec.dropped_constant_columns, 1);
  EXPECT_LE(dec.Xpen->dim(), 9);
}

TEST(Decompose, HigherOrderNullSpace) {
  const Decomposition dec = decompose(pspline_term(uniform_points(300, 7), 20, 3, 3));
  EXPECT_EQ(dec.X0->dim(), 2);
}

TEST(Decompose, EmptyTermIsAnError) {
  RawTerm t{Eigen::MatrixXd::Ones(10, 1), Eigen::MatrixXd::Zero(1, 1), 1};
  EXPECT_THROW(decompose(t), DegenerateBasis);
}
