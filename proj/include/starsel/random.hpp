#ifndef STARSEL_RANDOM_HPP
#define STARSEL_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace starsel {

/// Random stream used by samplers and simulators.
///
/// Streams are derived deterministically from a (seed, stream id) pair so that
/// chains and replicates never share state and runs are reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream & 0xffffffffu),
                      static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
    engine_.seed(seq);
  }

  double uniform() { return unif_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() { return norm_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
    return z;
  }

  /// Gamma with shape `shape` and rate `rate`.
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0);
    return g(engine_) / rate;
  }

  /// Inverse gamma with density proportional to x^{-shape-1} exp(-scale/x).
  double inverse_gamma(double shape, double scale) {
    return scale / gamma(shape, 1.0);
  }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::int64_t poisson(double mean) {
    std::poisson_distribution<std::int64_t> p(mean);
    return p(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace starsel

#endif  // STARSEL_RANDOM_HPP
