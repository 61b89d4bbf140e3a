#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "starsel/simlab.hpp"

using namespace starsel;

TEST(DgpFunctions, Values) {
  EXPECT_DOUBLE_EQ(dgp_f(1, -1.3), -1.3);
  EXPECT_DOUBLE_EQ(dgp_f(2, 1.0), 1.0);
  EXPECT_NEAR(dgp_f(3, 0.5), 2.641593, 1e-6);
  EXPECT_NEAR(dgp_f(4, 0.2), 5.75090960312969, 1e-12);  // scipy.stats.norm reference
  EXPECT_THROW(dgp_f(5, 0.0), InvalidArgument);
}

TEST(DgpFunctions, ConcurvityLink) {
  // two normal cdfs and a density, evaluated independently
  auto Phi = [](double x, double mu, double var) {
    return 0.5 * (1.0 + std::erf((x - mu) / std::sqrt(2.0 * var)));
  };
  for (double x : {-2.0, -0.7, 0.0, 0.4, 1.9}) {
    const double ref = 2 * Phi(x, -1, 0.16) + 2 * Phi(x, 1, 0.09) -
                       4 * std::exp(-x * x / 2) / std::sqrt(2 * M_PI) - 2;
    EXPECT_NEAR(concurvity_g(x), ref, 1e-14);
  }
}

TEST(Scenario, HighSparsityHasFourActiveCovariates) {
  ScenarioSpec s;
  const auto sc = generate_scenario(s);
  EXPECT_EQ(sc.train.X.cols(), 20);
  EXPECT_EQ(sc.test.X.rows(), 5000);
  const auto eff = covariate_effects(s);
  EXPECT_EQ(std::count_if(eff.begin(), eff.end(), [](auto e) { return e.f != 0; }), 4);
  // changing an inactive covariate leaves eta unchanged
  Eigen::MatrixXd X = sc.train.X;
  X.col(10).setConstant(1.7);
  EXPECT_EQ(detail::linear_predictor(s, X), sc.train.eta);
  EXPECT_LE(sc.train.X.cwiseAbs().maxCoeff(), 2.0);
}

TEST(Scenario, TruthCounts) {
  ScenarioSpec low;
  low.sparsity = Sparsity::low;
  const auto t = truth_flags(low);
  EXPECT_EQ(t.size(), 32u);
  EXPECT_EQ(std::count(t.begin(), t.end(), true), 21);
  const auto h = truth_flags(ScenarioSpec{});
  EXPECT_EQ(h.size(), 40u);
  EXPECT_EQ(std::count(h.begin(), h.end(), true), 7);
}

TEST(Scenario, LowSparsityWeights) {
  ScenarioSpec s;
  s.sparsity = Sparsity::low;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(1, 16);
  X(0, 8) = 0.5;  // f1 weighted by 2
  X(0, 6) = 0.5;  // f3 weighted by 1.5
  EXPECT_NEAR(detail::linear_predictor(s, X)(0),
              2.0 * 0.5 + 1.5 * dgp_f(3, 0.5) + dgp_f(2, 0.0) + 1.5 * dgp_f(2, 0.0) +
                  2.0 * dgp_f(2, 0.0) + dgp_f(3, 0.0) + 2.0 * dgp_f(3, 0.0) +
                  dgp_f(4, 0.0) * 4.5,
              1e-12);
}

TEST(Scenario, NoiseVarianceFromSnr) {
  ScenarioSpec s;
  s.snr = 5.0;
  const auto sc = generate_scenario(s);
  const Eigen::VectorXd c = sc.train.eta.array() - sc.train.eta.mean();
  EXPECT_NEAR(sc.sigma2, c.squaredNorm() / 199.0 / 5.0, 1e-12);
}

TEST(Scenario, BitwiseReproducible) {
  ScenarioSpec s;
  s.correlation = Correlation::ar1;
  s.replicate_seed = 42;
  const auto a = generate_scenario(s), b = generate_scenario(s);
  EXPECT_EQ(a.train.X, b.train.X);
  EXPECT_EQ(a.train.y, b.train.y);
  EXPECT_EQ(a.test.y, b.test.y);
  s.replicate_seed = 43;
  EXPECT_NE(generate_scenario(s).train.y, a.train.y);
}

TEST(Scenario, Ar1LagOneCorrelation) {
  ScenarioSpec s;
  s.correlation = Correlation::ar1;
  s.n = 4000;
  s.n_test = 0;
  const auto sc = generate_scenario(s);
  const auto& X = sc.train.X;
  double sum = 0.0;
  for (Eigen::Index k = 0; k + 1 < X.cols(); ++k) {
    const Eigen::VectorXd a = X.col(k).array() - X.col(k).mean();
    const Eigen::VectorXd b = X.col(k + 1).array() - X.col(k + 1).mean();
    sum += a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
  }
  EXPECT_NEAR(sum / (X.cols() - 1), 0.7, 0.05);
  EXPECT_LE(X.cwiseAbs().maxCoeff(), 2.0);
}

TEST(Scenario, PoissonOverdispersedCounts) {
  ScenarioSpec s;
  s.family = Family::poisson;
  s.n = 500;
  const auto sc = generate_scenario(s);
  for (Eigen::Index i = 0; i < sc.train.y.size(); ++i) {
    EXPECT_GE(sc.train.y(i), 0.0);
    EXPECT_EQ(sc.train.y(i), std::floor(sc.train.y(i)));
  }
}

TEST(Scenario, ConcurvityLimits) {
  ScenarioSpec s;
  s.concurvity = ConcurvitySpec{1, 1.0, 5.0};
  auto sc = generate_scenario(s);
  EXPECT_EQ(sc.train.X.cols(), 10);
  for (Eigen::Index i = 0; i < 20; ++i)
    EXPECT_DOUBLE_EQ(sc.train.X(i, 3), concurvity_g(sc.train.X(i, 2)));

  s.concurvity = ConcurvitySpec{2, 0.0, 5.0};
  s.n = 3000;
  sc = generate_scenario(s);
  const Eigen::VectorXd x5 = sc.train.X.col(4);
  const double mean = x5.mean();
  const double var = (x5.array() - mean).square().sum() / (x5.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.1);
  EXPECT_NEAR(var, 1.0, 0.1);
  EXPECT_GT(x5.cwiseAbs().maxCoeff(), 2.0);  // normal, not uniform
}

TEST(Metrics, Examples) {
  ScenarioSpec low;
  low.sparsity = Sparsity::low;
  const auto t = truth_flags(low);
  EXPECT_DOUBLE_EQ(complexity_metrics(std::vector<bool>(32, true), t).accuracy, 21.0 / 32.0);
  const auto perfect = complexity_metrics(t, t);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.sensitivity, 1.0);
  EXPECT_EQ(perfect.specificity, 1.0);
  const auto none = complexity_metrics(std::vector<bool>(40, false), truth_flags(ScenarioSpec{}));
  EXPECT_DOUBLE_EQ(none.accuracy, 33.0 / 40.0);
  EXPECT_EQ(none.sensitivity, 0.0);
  EXPECT_THROW(complexity_metrics({true}, {true, false}), InvalidArgument);
  const auto sel = select_terms(Eigen::Vector3d(0.2, 0.5, 0.51));
  EXPECT_EQ(sel, (std::vector<bool>{false, false, true}));
}

TEST(Deviance, Examples) {
  const Eigen::VectorXd y = (Eigen::VectorXd(4) << 0, 1, 0, 1).finished();
  EXPECT_NEAR(predictive_deviance(Family::binomial_logit, y, Eigen::VectorXd::Zero(4)),
              2.0 * std::log(2.0), 1e-12);
  const Eigen::Vector3d g(0.4, -1.0, 2.0);
  EXPECT_NEAR(predictive_deviance(Family::gaussian, g, g), std::log(2.0 * M_PI), 1e-12);
  EXPECT_NEAR(predictive_deviance(Family::gaussian, g, g + Eigen::Vector3d::Constant(0.5),
                                  {.sigma2 = 2.0}),
              std::log(4.0 * M_PI) + 0.25 / 2.0, 1e-12);
}

TEST(Pem, ExpansionExample) {
  const std::vector<double> kappa{0, 5, 15, 25};
  const auto ds = pem_expand({12.0}, {true}, kappa);
  ASSERT_EQ(ds.rows(), 2);
  EXPECT_EQ(ds.offset(0), 5.0);
  EXPECT_EQ(ds.offset(1), 7.0);
  EXPECT_EQ(ds.delta(0), 0.0);
  EXPECT_EQ(ds.delta(1), 1.0);
  EXPECT_EQ(ds.interval, (std::vector<int>{0, 1}));

  const auto b = pem_expand({5.0}, {false}, kappa);
  ASSERT_EQ(b.rows(), 1);
  EXPECT_EQ(b.offset(0), 5.0);
  EXPECT_EQ(b.delta(0), 0.0);

  EXPECT_THROW(pem_expand({26.0}, {false}, kappa), DataError);
  EXPECT_THROW(pem_expand({1.0}, {false}, {1, 2}), InvalidArgument);
}

TEST(Pem, InvariantsAndLikelihoodEquivalence) {
  const std::vector<double> kappa{0, 5, 15, 25, 35, 45, 55, 65, 75, 85, 90};
  std::vector<double> lb;
  for (std::size_t j = 0; j + 1 < kappa.size(); ++j) lb.push_back(-4.0 + 0.1 * j);
  Rng rng(3);
  const Eigen::Vector2d coef(0.5, -0.3);
  const auto s = simulate_pem(300, kappa, lb, coef, rng);
  const auto ds = pem_expand(s.times, s.events, kappa, s.X);
  std::vector<double> total(s.times.size(), 0.0);
  std::vector<int> events(s.times.size(), 0);
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    total[ds.subject[r]] += ds.offset(r);
    events[ds.subject[r]] += static_cast<int>(ds.delta(r));
    EXPECT_EQ(ds.X.row(r), s.X.row(ds.subject[r]));
  }
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    EXPECT_NEAR(total[i], std::min(s.times[i], kappa.back()), 1e-12);
    EXPECT_EQ(events[i], s.events[i] ? 1 : 0);
  }
  Eigen::VectorXd eta_rows(ds.rows());
  for (Eigen::Index r = 0; r < ds.rows(); ++r) eta_rows(r) = lb[ds.interval[r]] + s.eta(ds.subject[r]);
  EXPECT_NEAR(pem_poisson_log_likelihood(ds, eta_rows),
              pem_log_likelihood(s.times, s.events, kappa, lb, s.eta), 1e-10);
}

TEST(Pem, DevianceWithoutEventsOrExposureVanishes) {
  const std::vector<double> kappa{0, 5, 15};
  const auto ds = pem_expand({3.0, 14.0}, {false, false}, kappa);
  EXPECT_NEAR(pem_predictive_deviance(ds, {1e-300, 1e-300}, Eigen::VectorXd::Zero(ds.rows())), 0.0,
              1e-200);
  EXPECT_GT(pem_predictive_deviance(ds, {0.1, 0.1}, Eigen::VectorXd::Zero(ds.rows())), 0.0);
}
