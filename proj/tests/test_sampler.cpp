#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "starsel/sampler.hpp"
#include "test_util.hpp"

using namespace starsel;

namespace {

SamplerConfig small_config(int chains = 2, int iters = 400) {
  SamplerConfig c;
  c.n_chains = chains;
  c.burn_in = 100;
  c.iterations = iters;
  c.thin = 2;
  c.seed = 42;
  c.threads = 1;
  return c;
}

// Gaussian data with block effects beta_true on standardized designs.
ModelSpec gaussian_problem(std::uint64_t seed, const std::vector<int>& dims,
                           const std::vector<double>& effect, int n = 200,
                           bool expanded = true) {
  Rng rng(seed);
  std::vector<DesignBlock> blocks;
  Eigen::VectorXd y = Eigen::VectorXd::Constant(n, 1.0);
  for (std::size_t j = 0; j < dims.size(); ++j) {
    Eigen::MatrixXd X = testutil::centered_normal(rng, n, dims[j]);
    y += X * Eigen::VectorXd::Constant(dims[j], effect[j]);
    blocks.push_back(testutil::block("b" + std::to_string(j), X, expanded));
  }
  for (int i = 0; i < n; ++i) y(i) += rng.normal();
  return testutil::spec(Family::gaussian, y, blocks);
}

double ks_against_cdf(std::vector<double> draws, const std::vector<double>& grid,
                      const std::vector<double>& cdf) {
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  const auto N = static_cast<double>(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const auto it = std::lower_bound(grid.begin(), grid.end(), draws[i]);
    std::size_t k = std::clamp<std::size_t>(it - grid.begin(), 1, grid.size() - 1);
    const double t = (draws[i] - grid[k - 1]) / (grid[k] - grid[k - 1]);
    const double F = cdf[k - 1] + std::clamp(t, 0.0, 1.0) * (cdf[k] - cdf[k - 1]);
    ks = std::max({ks, std::abs(F - i / N), std::abs(F - (i + 1) / N)});
  }
  return ks;
}

}  // namespace

TEST(Linalg, QrAndCholeskyAgree) {
  Rng rng(4);
  const Eigen::Index n = 60, k = 7;
  WeightedProblem p{testutil::centered_normal(rng, n, k), Eigen::VectorXd::Constant(n, 2.5),
                    rng.normal_vector(n), rng.normal_vector(k),
                    Eigen::VectorXd::LinSpaced(k, 0.1, 3.0)};
  const auto a = CanonicalGaussian::from_problem(p, FactorMethod::cholesky);
  const auto b = CanonicalGaussian::from_problem(p, FactorMethod::qr);
  EXPECT_LT((a.mean() - b.mean()).norm(), 1e-8 * a.mean().norm());
  EXPECT_LT((a.factor() - b.factor()).norm(), 1e-8 * a.factor().norm());
  const Eigen::VectorXd x = rng.normal_vector(k);
  EXPECT_NEAR(a.log_density(x), b.log_density(x), 1e-8);
}

TEST(Linalg, JitterRetryAndHardFailure) {
  Eigen::Matrix2d singular;
  singular << 1, 1, 1, 1;
  EXPECT_NO_THROW(CanonicalGaussian::from_precision(singular, Eigen::Vector2d(1, 1)));
  Eigen::Matrix2d indefinite;
  indefinite << 1, 0, 0, -1;
  EXPECT_THROW(CanonicalGaussian::from_precision(indefinite, Eigen::Vector2d(1, 1)),
               SamplerError);
}

TEST(Linalg, DrawsHaveRequestedMoments) {
  Eigen::Matrix2d Q;
  Q << 2.0, 0.6, 0.6, 1.0;
  const Eigen::Vector2d b(1.0, -0.5);
  const auto g = CanonicalGaussian::from_precision(Q, b);
  Rng rng(8);
  const int N = 200000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int i = 0; i < N; ++i) {
    const Eigen::Vector2d x = g.draw(rng);
    mean += x;
    cov += x * x.transpose();
  }
  mean /= N;
  cov = cov / N - mean * mean.transpose();
  EXPECT_LT((mean - Q.ldlt().solve(b)).norm(), 0.01);
  EXPECT_LT((cov - Q.inverse()).norm(), 0.01);
}

TEST(Init, QuotedFormulas) {
  ModelSpec s = gaussian_problem(1, {2}, {0.0});
  SamplerConfig cfg = small_config();
  cfg.init.beta = Eigen::Vector2d(1.0, -1.0);
  cfg.init.noise_sd = 0.0;
  cfg.init.gamma = 1.0;
  cfg.init.tau2 = 4.0;
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  EXPECT_DOUBLE_EQ(c.state().alpha(0), 1.0);
  EXPECT_DOUBLE_EQ(c.state().xi(0), 1.0);
  EXPECT_DOUBLE_EQ(c.state().xi(1), -1.0);
}

TEST(Init, PriorDrawnScaleShrinksSpikeStarts) {
  ModelSpec s = gaussian_problem(1, {2}, {0.0});
  SamplerConfig cfg = small_config();
  cfg.init.beta = Eigen::Vector2d(1.0, -1.0);
  cfg.init.noise_sd = 0.0;
  cfg.init.gamma = s.hyper.v0;
  cfg.init.tau2 = 4.0;
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  EXPECT_NEAR(c.state().alpha(0), std::sqrt(s.hyper.v0 * 4.0), 1e-14);
}

TEST(Init, DegenerateBlockDrawsXiFromPrior) {
  ModelSpec s = gaussian_problem(1, {3}, {0.0});
  SamplerConfig cfg = small_config();
  cfg.init.beta = Eigen::Vector3d::Zero();
  cfg.init.noise_sd = 0.0;
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  EXPECT_EQ(c.state().alpha(0), 0.0);
  EXPECT_GT(c.state().xi.cwiseAbs().sum(), 0.0);
  for (Eigen::Index l = 0; l < 3; ++l) EXPECT_TRUE(std::abs(c.state().m(l)) == 1.0);
}

TEST(Init, ChainsShareFisherBaseButDiffer) {
  ModelSpec s = gaussian_problem(2, {3, 2}, {0.5, 0.0});
  SamplerConfig cfg = small_config();
  const InitBase base = fisher_scoring_start(s, cfg);
  EXPECT_FALSE(base.fallback);
  Chain a(s, cfg, 0, base), b(s, cfg, 1, base);
  EXPECT_GT((stacked_beta(s, a.state()) - stacked_beta(s, b.state())).norm(), 0.0);
  // The shared base is the ridge solution: close to least squares here.
  EXPECT_NEAR(base.beta(0), 0.5, 0.2);
}

TEST(Init, EtaCacheMatchesAssembledPredictor) {
  ModelSpec s = gaussian_problem(3, {4, 1}, {0.3, 0.0});
  SamplerConfig cfg = small_config();
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  for (int it = 0; it < 20; ++it) {
    c.sweep();
    EXPECT_LT((c.state().eta - assemble_predictor(s, c.state())).cwiseAbs().maxCoeff(), 1e-10);
    for (Eigen::Index j = 0; j < s.p(); ++j) {
      const double g = c.state().gamma(j);
      EXPECT_TRUE(g == 1.0 || g == s.hyper.v0);
      EXPECT_GT(c.state().tau2(j), 0.0);
    }
  }
}

TEST(GaussianUpdates, FlatPriorLimit) {
  const int n = 50;
  Rng rng(6);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = 2.0 + rng.normal();
  ModelSpec s = testutil::spec(Family::gaussian, y,
                               {testutil::block("one", Eigen::MatrixXd::Ones(n, 1))});
  SamplerConfig cfg = small_config();
  cfg.init.theta = Eigen::VectorXd::Zero(1);
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  auto& st = c.state();
  st.xi(0) = 1.0;
  st.gamma(0) = 1.0;
  st.tau2(0) = 1e6;
  st.sigma2 = 1.0;
  c.refresh_eta();
  const auto g = c.gaussian_conditional(c.alpha_problem(0));
  EXPECT_NEAR(g.mean()(0), y.mean() * n / (n + 1e-6), 1e-9);
}

TEST(GaussianUpdates, SpikeConcentratesAlpha) {
  ModelSpec s = gaussian_problem(7, {3}, {0.0});
  SamplerConfig cfg = small_config();
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  auto& st = c.state();
  st.gamma(0) = s.hyper.v0;
  st.tau2(0) = s.hyper.b_tau;
  int inside = 0;
  for (int i = 0; i < 2000; ++i) {
    c.update_alpha();
    inside += std::abs(st.alpha(0)) < 5.0 * std::sqrt(s.hyper.v0 * st.tau2(0));
  }
  EXPECT_GE(inside, 1995);
}

TEST(GaussianUpdates, ZeroAlphaGivesPriorXi) {
  ModelSpec s = gaussian_problem(8, {4}, {1.0});
  SamplerConfig cfg = small_config();
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  c.state().alpha(0) = 0.0;
  c.refresh_eta();
  const auto g = c.gaussian_conditional(c.xi_problem(0));
  EXPECT_LT((g.mean() - c.state().m).norm(), 1e-12);
  EXPECT_LT((g.precision() - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
}

TEST(GaussianUpdates, ScalarXiDrawsMatchGridDensity) {
  ModelSpec s = gaussian_problem(9, {1}, {0.8}, 30);
  SamplerConfig cfg = small_config();
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  auto& st = c.state();
  st.alpha(0) = 0.6;
  st.m(0) = 1.0;
  st.sigma2 = 1.5;
  c.refresh_eta();
  const Eigen::VectorXd eta_rest = st.eta - s.blocks[0].X.col(0) * st.alpha(0) * st.xi(0);
  // Grid-normalized CDF of prior x likelihood.
  std::vector<double> grid, cdf;
  const double lo = -6.0, hi = 8.0;
  const int N = 20000;
  std::vector<double> lf(N + 1);
  double mx = -INFINITY;
  for (int i = 0; i <= N; ++i) {
    const double x = lo + (hi - lo) * i / N;
    double l = oracle::log_normal_pdf(x, 1.0, 1.0);
    for (Eigen::Index r = 0; r < s.n(); ++r)
      l += oracle::log_normal_pdf(s.y(r), eta_rest(r) + s.blocks[0].X(r, 0) * 0.6 * x, 1.5);
    lf[i] = l;
    mx = std::max(mx, l);
    grid.push_back(x);
  }
  double acc = 0.0;
  cdf.push_back(0.0);
  for (int i = 1; i <= N; ++i) {
    acc += 0.5 * (std::exp(lf[i - 1] - mx) + std::exp(lf[i] - mx));
    cdf.push_back(acc);
  }
  for (double& v : cdf) v /= acc;
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) {
    c.update_xi();
    draws.push_back(st.xi(0));
    st.eta = eta_rest + s.blocks[0].X.col(0) * st.alpha(0) * st.xi(0);
  }
  EXPECT_LT(ks_against_cdf(draws, grid, cdf), 0.01);
}

TEST(Sampler, ConjugateRidgeRecovery) {
  // gamma, tau^2, w and sigma^2 held fixed: exact Gibbs for a ridge model.
  ModelSpec s = gaussian_problem(10, {1, 3, 5}, {0.8, 0.3, 0.0}, 200, false);
  SamplerConfig cfg = small_config(2, 6000);
  cfg.thin = 1;
  cfg.hold_gamma = cfg.hold_tau2 = cfg.hold_w = cfg.hold_sigma2 = true;
  cfg.init.gamma = 1.0;
  cfg.init.tau2 = 0.5;
  cfg.init.w = 0.5;
  cfg.init.sigma2 = 1.0;
  const RunResult r = run_chains(s, cfg);
  const Eigen::Index q = s.q();
  Eigen::MatrixXd F(s.n(), 1 + q);
  F.col(0).setOnes();
  Eigen::Index off = 0;
  for (const auto& b : s.blocks) {
    F.block(0, 1 + off, s.n(), b.dim()) = b.X;
    off += b.dim();
  }
  Eigen::VectorXd prior_prec(1 + q);
  prior_prec(0) = 1.0 / s.hyper.fixed_prior_var;
  prior_prec.tail(q).setConstant(1.0 / 0.5);
  Eigen::MatrixXd Q = F.transpose() * F;
  Q.diagonal() += prior_prec;
  const Eigen::VectorXd mean = Q.ldlt().solve(F.transpose() * s.y);
  for (Eigen::Index l = 0; l < q; ++l) {
    std::vector<Eigen::VectorXd> chains;
    for (const auto& c : r.chains) chains.push_back(c.beta.col(l));
    const double se = mc_standard_error(chains);
    EXPECT_LT(std::abs(r.summary.beta[l].mean - mean(1 + l)), 3.0 * se + 1e-12) << "coef " << l;
  }
}

TEST(Sampler, NullModelInterceptIsSampleMean) {
  Rng rng(12);
  Eigen::VectorXd y(150);
  for (int i = 0; i < 150; ++i) y(i) = 3.0 + 2.0 * rng.normal();
  ModelSpec s = testutil::spec(Family::gaussian, y, {});
  SamplerConfig cfg = small_config(2, 4000);
  const RunResult r = run_chains(s, cfg);
  std::vector<Eigen::VectorXd> chains;
  for (const auto& c : r.chains) chains.push_back(c.theta.col(0));
  EXPECT_LT(std::abs(r.summary.theta[0].mean - y.mean()), 3.0 * mc_standard_error(chains));
}

TEST(Sampler, SameSeedIsBitwiseIdentical) {
  ModelSpec s = gaussian_problem(13, {3, 2, 1}, {0.5, 0.0, 0.3});
  SamplerConfig cfg = small_config(2, 200);
  const RunResult a = run_chains(s, cfg);
  cfg.threads = 2;
  const RunResult b = run_chains(s, cfg);
  for (std::size_t c = 0; c < a.chains.size(); ++c) {
    EXPECT_EQ(a.chains[c].beta, b.chains[c].beta);
    EXPECT_EQ(a.chains[c].tau2, b.chains[c].tau2);
    EXPECT_EQ(a.chains[c].pincl, b.chains[c].pincl);
  }
  cfg.seed = 43;
  const RunResult d = run_chains(s, cfg);
  EXPECT_NE(a.chains[0].beta, d.chains[0].beta);
}

TEST(Sampler, ZeroIterationsIsAnError) {
  ModelSpec s = gaussian_problem(14, {1}, {0.0});
  SamplerConfig cfg = small_config();
  cfg.iterations = 0;
  EXPECT_THROW(run_chains(s, cfg), InvalidArgument);
}

TEST(Sampler, GaussianAcceptanceIsOne) {
  ModelSpec s = gaussian_problem(15, {2}, {0.4});
  const RunResult r = run_chains(s, small_config(1, 100));
  for (const auto& st : r.chains[0].acceptance) EXPECT_EQ(st.rate(), 1.0);
}

TEST(Piwls, QuadraticLikelihoodIsAlwaysAccepted) {
  ModelSpec s = gaussian_problem(16, {3, 2}, {0.5, 0.2});
  for (auto mode : {PiwlsExpansion::previous_mean, PiwlsExpansion::current_state}) {
    SamplerConfig cfg = small_config(1);
    cfg.gaussian_via_piwls = true;
    cfg.expansion = mode;
    Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
    for (int it = 0; it < 30; ++it) {
      c.update_alpha();
      EXPECT_NEAR(c.last_log_accept(), 0.0, 1e-8);
      c.update_xi();
      EXPECT_NEAR(c.last_log_accept(), 0.0, 1e-8);
    }
  }
}

TEST(Piwls, PoissonInterceptMatchesLogMean) {
  Rng rng(17);
  const int n = 2000;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = static_cast<double>(rng.poisson(3.2));
  ModelSpec s = testutil::spec(Family::poisson, y, {});
  SamplerConfig cfg = small_config(2, 3000);
  const RunResult r = run_chains(s, cfg);
  std::vector<Eigen::VectorXd> chains;
  for (const auto& c : r.chains) chains.push_back(c.theta.col(0));
  EXPECT_LT(std::abs(r.summary.theta[0].mean - std::log(y.mean())),
            3.0 * mc_standard_error(chains));
  EXPECT_GT(r.chains[0].acceptance[0].rate(), 0.5);
}

TEST(Piwls, FrozenExpansionPointKeepsDetailedBalance) {
  Rng rng(18);
  const int n = 25;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = static_cast<double>(rng.poisson(2.0));
  ModelSpec s = testutil::spec(Family::poisson, y, {});
  SamplerConfig cfg = small_config(1);
  cfg.expansion = PiwlsExpansion::frozen;
  Chain c(s, cfg, 0, fisher_scoring_start(s, cfg));
  c.set_expansion_points(Eigen::VectorXd::Constant(1, std::log(y.mean()) + 0.35),
                         Eigen::VectorXd(0), Eigen::VectorXd(0));
  std::vector<double> draws;
  for (int it = 0; it < 200000; ++it) {
    c.update_theta();
    if (it % 4 == 0) draws.push_back(c.state().theta(0));
  }
  // Grid oracle: flat N(0, 1e6) prior x Poisson likelihood.
  std::vector<double> grid, cdf{0.0};
  const double lo = -1.5, hi = 2.5;
  const int N = 20000;
  std::vector<double> lf;
  double mx = -INFINITY;
  for (int i = 0; i <= N; ++i) {
    const double t = lo + (hi - lo) * i / N;
    grid.push_back(t);
    lf.push_back(y.sum() * t - n * std::exp(t) - 0.5 * t * t / s.hyper.fixed_prior_var);
    mx = std::max(mx, lf.back());
  }
  double acc = 0.0;
  for (int i = 1; i <= N; ++i) {
    acc += 0.5 * (std::exp(lf[i - 1] - mx) + std::exp(lf[i] - mx));
    cdf.push_back(acc);
  }
  for (double& v : cdf) v /= acc;
  EXPECT_LT(ks_against_cdf(draws, grid, cdf), 0.02);
}

TEST(RaoBlackwell, ConstantFullConditional) {
  ChainOutput c;
  c.layout.dims = {2};
  c.layout.expanded = {true};
  c.layout.labels = {"b"};
  c.layout.v0 = 0.00025;
  c.alpha = Eigen::MatrixXd::Zero(5, 1);
  c.beta = Eigen::MatrixXd::Zero(5, 2);
  c.tau2 = Eigen::MatrixXd::Ones(5, 1);
  c.w = Eigen::VectorXd::Constant(5, 0.5);
  EXPECT_NEAR(inclusion_probabilities(c)(0), 0.01556, 1e-5);
  // A single draw reproduces that state's full conditional.
  ChainOutput one = c;
  one.alpha = Eigen::MatrixXd::Constant(1, 1, 0.02);
  one.beta = Eigen::MatrixXd::Constant(1, 2, 0.02);
  one.tau2 = Eigen::MatrixXd::Constant(1, 1, 0.7);
  one.w = Eigen::VectorXd::Constant(1, 0.3);
  EXPECT_DOUBLE_EQ(inclusion_probabilities(one)(0),
                   gamma_probability(0.0004, 0.7, 0.3, 0.00025));
}

TEST(RaoBlackwell, AgreesWithIndicatorFrequency) {
  ModelSpec s = gaussian_problem(19, {3, 4, 1, 2}, {0.3, 0.0, 0.15, 0.0}, 150);
  SamplerConfig cfg = small_config(2, 6000);
  cfg.thin = 3;
  const RunResult r = run_chains(s, cfg);
  for (Eigen::Index j = 0; j < s.p(); ++j) {
    EXPECT_NEAR(r.summary.pincl(j), r.summary.gamma_fraction(j), 0.05) << "block " << j;
    EXPECT_GE(r.summary.pincl(j), 0.0);
    EXPECT_LE(r.summary.pincl(j), 1.0);
  }
}

TEST(Sampler, BinomialRunProducesSensibleAcceptance) {
  Rng rng(20);
  const int n = 300;
  Eigen::MatrixXd X = testutil::centered_normal(rng, n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i)
    y(i) = rng.bernoulli(logistic(0.3 + 1.2 * X(i, 0) - 0.8 * X(i, 1))) ? 1.0 : 0.0;
  ModelSpec s = testutil::spec(Family::binomial_logit, y,
                               {testutil::block("x", X.leftCols(2)),
                                testutil::block("z", X.rightCols(1))});
  const RunResult r = run_chains(s, small_config(2, 1000));
  for (const auto& c : r.chains) {
    ASSERT_FALSE(c.failed) << c.failure;
    for (const auto& st : c.acceptance) EXPECT_GT(st.rate(), 0.1) << st.label;
  }
  EXPECT_GT(r.summary.pincl(0), 0.9);
}
