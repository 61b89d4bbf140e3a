#ifndef STARSEL_SAMPLER_HPP
#define STARSEL_SAMPLER_HPP

// Blockwise Gibbs / Metropolis-within-Gibbs sampler for the parameter-expanded
// spike-and-slab prior. One sweep updates, in order: fixed coefficients,
// alpha blocks, m, xi blocks, rescaling, tau^2, gamma, w and sigma^2.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "starsel/conditionals.hpp"
#include "starsel/diagnostics.hpp"
#include "starsel/error.hpp"
#include "starsel/linalg.hpp"
#include "starsel/model.hpp"
#include "starsel/random.hpp"

namespace starsel {

/// Where the penalized IWLS proposal is linearized.
enum class PiwlsExpansion {
  previous_mean,  // mean of the previous proposal for the same update block
  current_state,  // current value; reverse proposal built at the candidate
  frozen          // fixed point (kept from initialization); for testing
};

struct InitOverrides {
  std::optional<double> gamma;
  std::optional<double> tau2;
  std::optional<double> w;
  std::optional<double> sigma2;
  std::optional<Eigen::VectorXd> beta;   // replaces the Fisher-scoring start
  std::optional<Eigen::VectorXd> theta;
  double noise_sd = 0.1;
};

struct SamplerConfig {
  int n_chains = 8;
  int burn_in = 500;
  int iterations = 5000;
  int thin = 5;
  int block_size_alpha = 30;
  int block_size_xi = 30;
  std::uint64_t seed = 1;
  int rescale_every = 1;
  double credible_level = 0.8;
  FactorMethod factor = FactorMethod::cholesky;
  PiwlsExpansion expansion = PiwlsExpansion::previous_mean;
  bool gaussian_via_piwls = false;
  unsigned threads = 0;  // 0: one per hardware thread
  int fisher_steps = 5;
  double fisher_prior_var = 1e3;
  // Parameters held at their initial values.
  bool hold_gamma = false;
  bool hold_tau2 = false;
  bool hold_w = false;
  bool hold_sigma2 = false;
  bool hold_theta = false;
  InitOverrides init;

  void validate() const {
    if (n_chains <= 0 || burn_in < 0 || iterations <= 0 || thin <= 0 ||
        block_size_alpha <= 0 || block_size_xi <= 0 || rescale_every <= 0)
      throw InvalidArgument("sampler settings must be positive");
    if (iterations < thin) throw InvalidArgument("iterations must be at least thin");
    if (!(credible_level > 0.0 && credible_level < 1.0))
      throw InvalidArgument("credible level must lie in (0, 1)");
  }
};

struct UpdateStats {
  std::string label;
  long proposals = 0;
  long accepted = 0;
  long failures = 0;
  double rate() const { return proposals ? static_cast<double>(accepted) / proposals : 1.0; }
};

struct BlockLayout {
  std::vector<std::string> labels;
  std::vector<Eigen::Index> dims;
  std::vector<bool> expanded;
  std::vector<std::string> fixed_labels;
  double v0 = 0.00025;
  Family family = Family::gaussian;
};

/// Thinned draws of one chain; one row per saved iteration.
struct ChainOutput {
  int chain_id = 0;
  bool failed = false;
  std::string failure;
  BlockLayout layout;
  Eigen::MatrixXd alpha, xi, m, gamma, tau2, beta, theta;
  Eigen::VectorXd w, sigma2;
  Eigen::VectorXd pincl;
  std::vector<UpdateStats> acceptance;
  std::vector<std::string> warnings;
  double runtime_seconds = 0.0;

  Eigen::Index saved() const { return alpha.rows(); }
};

/// Per-block full-conditional P(gamma_j = 1 | .) at one state.
inline double block_gamma_probability(const BlockLayout& layout, std::size_t j, double alpha,
                                      double beta_sumsq, double tau2, double w) {
  if (layout.expanded[j]) return gamma_probability(alpha * alpha, tau2, w, layout.v0, 1.0);
  return gamma_probability(beta_sumsq, tau2, w, layout.v0,
                           static_cast<double>(layout.dims[j]));
}

/// Rao-Blackwellized inclusion probabilities: the full-conditional
/// probability averaged over the saved states.
inline Eigen::VectorXd inclusion_probabilities(const ChainOutput& chain) {
  const Eigen::Index T = chain.saved();
  if (T == 0) throw InvalidArgument("chain has no saved draws");
  const auto& L = chain.layout;
  const auto p = static_cast<Eigen::Index>(L.dims.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::Index off = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const Eigen::Index d = L.dims[j];
      const double ss = chain.beta.row(t).segment(off, d).squaredNorm();
      out(j) += block_gamma_probability(L, static_cast<std::size_t>(j), chain.alpha(t, j), ss,
                                        chain.tau2(t, j), chain.w(t));
      off += d;
    }
  }
  return out / static_cast<double>(T);
}

/// Fraction of saved draws with gamma_j = 1.
inline Eigen::VectorXd gamma_fraction(const ChainOutput& chain) {
  if (chain.saved() == 0) throw InvalidArgument("chain has no saved draws");
  return (chain.gamma.array() == 1.0).cast<double>().colwise().mean().transpose();
}

/// Fisher-scoring start shared by all chains.
struct InitBase {
  Eigen::VectorXd theta;
  Eigen::VectorXd beta;
  bool fallback = false;
};

namespace detail {

struct FamilyMoments {
  Eigen::VectorXd mu;
  Eigen::VectorXd var;  // variance function at mu
};

inline FamilyMoments moments(Family f, const Eigen::VectorXd& eta) {
  FamilyMoments m;
  switch (f) {
    case Family::gaussian:
      m.mu = eta;
      m.var = Eigen::VectorXd::Ones(eta.size());
      break;
    case Family::binomial_logit:
      m.mu = eta.unaryExpr([](double e) { return logistic(e); });
      m.var = m.mu.array() * (1.0 - m.mu.array());
      m.var = m.var.cwiseMax(1e-12);
      break;
    case Family::poisson:
      m.mu = eta.array().exp();
      m.var = m.mu.cwiseMax(1e-300);
      break;
  }
  if (!m.mu.allFinite() || !m.var.allFinite())
    throw SamplerError("non-finite working weights");
  return m;
}

inline double link_start(Family f, const Eigen::VectorXd& y, const Eigen::VectorXd& offsets) {
  const double ybar = y.mean();
  switch (f) {
    case Family::gaussian: return ybar - offsets.mean();
    case Family::binomial_logit: {
      const double p = std::clamp(ybar, 0.01, 0.99);
      return std::log(p / (1.0 - p));
    }
    case Family::poisson: {
      const double rate = std::max(y.sum(), 0.5) / offsets.array().exp().sum();
      return std::log(rate);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Ridge-penalized Fisher scoring for the joint (theta, beta) vector.
inline InitBase fisher_scoring_start(const ModelSpec& spec, const SamplerConfig& cfg) {
  const Eigen::Index n = spec.n(), k = spec.fixed_design.cols(), q = spec.q();
  Eigen::MatrixXd F(n, k + q);
  F.leftCols(k) = spec.fixed_design;
  const auto off = spec.block_offsets();
  for (Eigen::Index j = 0; j < spec.p(); ++j)
    F.block(0, k + off[j], n, spec.blocks[j].dim()) = spec.blocks[j].X;
  Eigen::VectorXd prec(k + q);
  prec.head(k).setConstant(1.0 / spec.hyper.fixed_prior_var);
  prec.tail(q).setConstant(1.0 / cfg.fisher_prior_var);

  InitBase base;
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(k + q);
  coef(0) = detail::link_start(spec.family, spec.y, spec.offsets);
  try {
    for (int step = 0; step < cfg.fisher_steps; ++step) {
      const Eigen::VectorXd eta = F * coef + spec.offsets;
      const auto mom = detail::moments(spec.family, eta);
      const Eigen::VectorXd z =
          (eta - spec.offsets).array() + (spec.y - mom.mu).array() / mom.var.array();
      WeightedProblem prob{F, mom.var, z, Eigen::VectorXd::Zero(k + q), prec};
      coef = CanonicalGaussian::from_problem(prob).mean();
      if (!coef.allFinite()) throw SamplerError("diverged");
    }
  } catch (const Error&) {
    base.fallback = true;
    coef.setZero();
    coef(0) = detail::link_start(spec.family, spec.y, spec.offsets);
  }
  base.theta = coef.head(k);
  base.beta = coef.tail(q);
  return base;
}

/// One Markov chain. Exposes the individual updates so they can be tested.
class Chain {
 public:
  Chain(const ModelSpec& spec, const SamplerConfig& cfg, int chain_id, const InitBase& base)
      : spec_(spec), cfg_(cfg), chain_id_(chain_id), rng_(cfg.seed, static_cast<std::uint64_t>(chain_id)) {
    off_ = spec.block_offsets();
    build_partitions();
    if (base.fallback) warn("W003 Fisher scoring did not converge; started from zero plus noise");
    init_state(base);
  }

  PeNMIGState& state() { return s_; }
  const PeNMIGState& state() const { return s_; }
  Rng& rng() { return rng_; }
  const std::vector<UpdateStats>& stats() const { return stats_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Resynchronizes the cached predictor after external state edits.
  void refresh_eta() { s_.eta = assemble_predictor(spec_, s_); }

  void sweep() {
    ++iteration_;
    if (!cfg_.hold_theta) update_theta();
    update_alpha();
    update_m();
    update_xi();
    if (iteration_ % cfg_.rescale_every == 0) rescale_all();
    refresh_eta();
    if (!cfg_.hold_tau2) update_tau2();
    if (!cfg_.hold_gamma) update_gamma();
    if (!cfg_.hold_w) update_w();
    if (spec_.family == Family::gaussian && !cfg_.hold_sigma2) update_sigma2();
  }

  void update_theta() {
    const Eigen::Index k = spec_.fixed_design.cols();
    Eigen::VectorXd pm = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd pp = Eigen::VectorXd::Constant(k, 1.0 / spec_.hyper.fixed_prior_var);
    Eigen::VectorXd cur = s_.theta;
    cur = coefficient_step(spec_.fixed_design, cur, pm, pp, theta_exp_, stats_[theta_stat_]);
    s_.theta = cur;
  }

  /// Design, current value and diagonal prior of one coefficient update block.
  struct ChunkProblem {
    Eigen::MatrixXd W;
    Eigen::VectorXd cur, pm, pp, e;
  };

  std::size_t alpha_chunk_count() const { return alpha_chunks_.size(); }
  std::size_t xi_chunk_count() const { return xi_chunks_.size(); }

  ChunkProblem alpha_problem(std::size_t c) const {
    const auto& blocks = alpha_chunks_.at(c);
    const auto K = static_cast<Eigen::Index>(blocks.size());
    ChunkProblem cp{Eigen::MatrixXd(spec_.n(), K), Eigen::VectorXd(K),
                    Eigen::VectorXd::Zero(K), Eigen::VectorXd(K), Eigen::VectorXd(K)};
    for (Eigen::Index i = 0; i < K; ++i) {
      const Eigen::Index j = blocks[i];
      cp.W.col(i) = spec_.blocks[j].X * s_.xi.segment(off_[j], spec_.blocks[j].dim());
      cp.cur(i) = s_.alpha(j);
      cp.pp(i) = 1.0 / (s_.gamma(j) * s_.tau2(j));
      cp.e(i) = alpha_exp_(j);
    }
    return cp;
  }

  ChunkProblem xi_problem(std::size_t c) const {
    const auto& coords = xi_chunks_.at(c);
    const auto K = static_cast<Eigen::Index>(coords.size());
    ChunkProblem cp{Eigen::MatrixXd(spec_.n(), K), Eigen::VectorXd(K), Eigen::VectorXd(K),
                    Eigen::VectorXd(K), Eigen::VectorXd(K)};
    for (Eigen::Index i = 0; i < K; ++i) {
      const auto [j, l] = coords[i];
      const auto& b = spec_.blocks[j];
      cp.W.col(i) = (b.expanded ? s_.alpha(j) : 1.0) * b.X.col(l - off_[j]);
      cp.cur(i) = s_.xi(l);
      if (b.expanded) {
        cp.pm(i) = s_.m(l);
        cp.pp(i) = 1.0;
      } else {
        cp.pm(i) = 0.0;
        cp.pp(i) = 1.0 / (s_.gamma(j) * s_.tau2(j));
      }
      cp.e(i) = xi_exp_(l);
    }
    return cp;
  }

  /// Exact Gaussian full conditional of a chunk (gaussian family).
  CanonicalGaussian gaussian_conditional(const ChunkProblem& cp) const {
    const Eigen::VectorXd eta_rest = s_.eta - cp.W * cp.cur;
    WeightedProblem prob{cp.W, Eigen::VectorXd::Constant(cp.W.rows(), 1.0 / s_.sigma2),
                         spec_.y - eta_rest, cp.pm, cp.pp};
    return CanonicalGaussian::from_problem(prob, cfg_.factor);
  }

  void update_alpha() {
    for (std::size_t c = 0; c < alpha_chunks_.size(); ++c) {
      ChunkProblem cp = alpha_problem(c);
      const Eigen::VectorXd next =
          coefficient_step(cp.W, cp.cur, cp.pm, cp.pp, cp.e, stats_[alpha_stat_[c]]);
      const auto& blocks = alpha_chunks_[c];
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        s_.alpha(blocks[i]) = next(static_cast<Eigen::Index>(i));
        alpha_exp_(blocks[i]) = cp.e(static_cast<Eigen::Index>(i));
      }
    }
  }

  void update_m() {
    for (Eigen::Index j = 0; j < spec_.p(); ++j) {
      const Eigen::Index d = spec_.blocks[j].dim();
      for (Eigen::Index l = off_[j]; l < off_[j] + d; ++l)
        s_.m(l) = !spec_.blocks[j].expanded ? 1.0
                  : rng_.bernoulli(m_probability(s_.xi(l))) ? 1.0
                                                             : -1.0;
    }
  }

  void update_xi() {
    for (std::size_t c = 0; c < xi_chunks_.size(); ++c) {
      ChunkProblem cp = xi_problem(c);
      const Eigen::VectorXd next =
          coefficient_step(cp.W, cp.cur, cp.pm, cp.pp, cp.e, stats_[xi_stat_[c]]);
      const auto& coords = xi_chunks_[c];
      for (std::size_t i = 0; i < coords.size(); ++i) {
        s_.xi(coords[i].second) = next(static_cast<Eigen::Index>(i));
        xi_exp_(coords[i].second) = cp.e(static_cast<Eigen::Index>(i));
      }
    }
  }

  void rescale_all() {
    for (Eigen::Index j = 0; j < spec_.p(); ++j) {
      if (!spec_.blocks[j].expanded) continue;
      const Eigen::Index d = spec_.blocks[j].dim();
      auto seg = s_.xi.segment(off_[j], d);
      const RescaleResult r = rescale(s_.alpha(j), seg);
      if (r.skipped) {
        ++zero_xi_blocks_[j];
        continue;
      }
      xi_exp_.segment(off_[j], d) *= r.factor;
      alpha_exp_(j) /= r.factor;
    }
  }

  void update_tau2() {
    const auto& h = spec_.hyper;
    for (Eigen::Index j = 0; j < spec_.p(); ++j) {
      const auto [ss, dim] = block_sumsq(j);
      const auto ig = tau2_conditional(h.a_tau, h.b_tau, ss, s_.gamma(j), dim);
      s_.tau2(j) = rng_.inverse_gamma(ig.shape, ig.scale);
    }
  }

  void update_gamma() {
    for (Eigen::Index j = 0; j < spec_.p(); ++j) {
      const auto [ss, dim] = block_sumsq(j);
      const double pr = gamma_probability(ss, s_.tau2(j), s_.w, spec_.hyper.v0, dim);
      s_.gamma(j) = rng_.bernoulli(pr) ? 1.0 : spec_.hyper.v0;
    }
  }

  void update_w() {
    const double slab = static_cast<double>((s_.gamma.array() == 1.0).count());
    const double spike = static_cast<double>(spec_.p()) - slab;
    const auto bp = w_conditional(spec_.hyper.a_w, spec_.hyper.b_w, slab, spike);
    // Keep w strictly inside (0, 1) so the log prior odds stay finite.
    s_.w = std::clamp(rng_.beta(bp.a, bp.b), 1e-300, 1.0 - 1e-16);
  }

  void update_sigma2() {
    const double rss = (spec_.y - s_.eta).squaredNorm();
    const auto ig = sigma2_conditional(spec_.hyper.a_sigma, spec_.hyper.b_sigma,
                                       static_cast<double>(spec_.n()), rss);
    s_.sigma2 = rng_.inverse_gamma(ig.shape, ig.scale);
  }

  /// P(gamma_j = 1 | .) for every block at the current state.
  Eigen::VectorXd gamma_probabilities() const {
    Eigen::VectorXd out(spec_.p());
    for (Eigen::Index j = 0; j < spec_.p(); ++j) {
      const auto [ss, dim] = block_sumsq(j);
      out(j) = gamma_probability(ss, s_.tau2(j), s_.w, spec_.hyper.v0, dim);
    }
    return out;
  }

  /// Summary warnings accumulated over the run (acceptance, zero blocks).
  std::vector<std::string> finish_warnings() const {
    std::vector<std::string> out = warnings_;
    for (const auto& [j, count] : zero_xi_blocks_)
      out.push_back("W002 chain " + std::to_string(chain_id_) + ": block '" +
                    spec_.blocks[j].label + "' had all-zero xi at " + std::to_string(count) +
                    " rescaling step(s); rescaling skipped");
    for (const auto& st : stats_) {
      if (st.proposals == 0 || !uses_mh()) continue;
      const double r = st.rate();
      if (r < 0.1 || r > 0.95) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f", r);
        out.push_back("W001 chain " + std::to_string(chain_id_) + ": acceptance rate " + buf +
                      " for update block " + st.label + " outside [0.1, 0.95]");
      }
      if (st.failures > 0)
        out.push_back("W005 chain " + std::to_string(chain_id_) + ": " +
                      std::to_string(st.failures) + " rejected proposal(s) with non-finite " +
                      "working weights in " + st.label);
    }
    return out;
  }

  bool uses_mh() const { return spec_.family != Family::gaussian || cfg_.gaussian_via_piwls; }

  /// Log acceptance probability of the last MH step (0 for Gibbs steps).
  double last_log_accept() const { return last_log_accept_; }

  /// Replaces the stored expansion point (frozen-mode experiments).
  void set_expansion_points(const Eigen::VectorXd& theta, const Eigen::VectorXd& alpha,
                            const Eigen::VectorXd& xi) {
    theta_exp_ = theta;
    alpha_exp_ = alpha;
    xi_exp_ = xi;
  }

 private:
  const ModelSpec& spec_;
  const SamplerConfig& cfg_;
  int chain_id_;
  Rng rng_;
  PeNMIGState s_;
  std::vector<Eigen::Index> off_;
  std::vector<std::vector<Eigen::Index>> alpha_chunks_;
  std::vector<std::vector<std::pair<Eigen::Index, Eigen::Index>>> xi_chunks_;
  std::vector<UpdateStats> stats_;
  std::size_t theta_stat_ = 0;
  std::vector<std::size_t> alpha_stat_, xi_stat_;
  Eigen::VectorXd theta_exp_, alpha_exp_, xi_exp_;
  std::map<Eigen::Index, long> zero_xi_blocks_;
  std::vector<std::string> warnings_;
  long iteration_ = 0;
  double last_log_accept_ = 0.0;

  void warn(std::string msg) { warnings_.push_back(std::move(msg)); }

  std::pair<double, double> block_sumsq(Eigen::Index j) const {
    const Eigen::Index d = spec_.blocks[j].dim();
    if (spec_.blocks[j].expanded) return {s_.alpha(j) * s_.alpha(j), 1.0};
    return {s_.xi.segment(off_[j], d).squaredNorm(), static_cast<double>(d)};
  }

  void build_partitions() {
    stats_.push_back({"theta"});
    theta_stat_ = 0;
    const auto B = static_cast<Eigen::Index>(cfg_.block_size_alpha);
    std::vector<Eigen::Index> cur;
    auto flush_alpha = [&] {
      if (cur.empty()) return;
      alpha_stat_.push_back(stats_.size());
      stats_.push_back({"alpha[" + spec_.blocks[cur.front()].label + ".." +
                        spec_.blocks[cur.back()].label + "]"});
      alpha_chunks_.push_back(cur);
      cur.clear();
    };
    for (Eigen::Index j = 0; j < spec_.p(); ++j) {
      if (!spec_.blocks[j].expanded) continue;
      cur.push_back(j);
      if (static_cast<Eigen::Index>(cur.size()) == B) flush_alpha();
    }
    flush_alpha();

    // xi: term boundaries first, long blocks split, short neighbours merged.
    const auto Bx = static_cast<Eigen::Index>(cfg_.block_size_xi);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> chunk;
    std::string first_label, last_label;
    auto flush_xi = [&] {
      if (chunk.empty()) return;
      xi_stat_.push_back(stats_.size());
      stats_.push_back({"xi[" + (first_label == last_label ? first_label
                                                            : first_label + ".." + last_label) +
                        "]"});
      xi_chunks_.push_back(chunk);
      chunk.clear();
    };
    for (Eigen::Index j = 0; j < spec_.p(); ++j) {
      const Eigen::Index d = spec_.blocks[j].dim();
      if (static_cast<Eigen::Index>(chunk.size()) + std::min(d, Bx) > Bx) flush_xi();
      for (Eigen::Index l = 0; l < d; ++l) {
        if (static_cast<Eigen::Index>(chunk.size()) == Bx) flush_xi();
        if (chunk.empty()) first_label = spec_.blocks[j].label;
        last_label = spec_.blocks[j].label;
        chunk.emplace_back(j, off_[j] + l);
      }
    }
    flush_xi();
  }

  void init_state(const InitBase& base) {
    const auto& h = spec_.hyper;
    const auto& io = cfg_.init;
    const Eigen::Index p = spec_.p(), q = spec_.q();
    s_.alpha.resize(p);
    s_.gamma.resize(p);
    s_.tau2.resize(p);
    s_.xi.resize(q);
    s_.m.resize(q);
    s_.w = io.w ? *io.w : rng_.beta(h.a_w, h.b_w);
    for (Eigen::Index j = 0; j < p; ++j) {
      s_.gamma(j) = io.gamma ? *io.gamma : (rng_.bernoulli(s_.w) ? 1.0 : h.v0);
      s_.tau2(j) = io.tau2 ? *io.tau2 : rng_.inverse_gamma(h.a_tau, h.b_tau);
    }
    Eigen::VectorXd beta = io.beta ? *io.beta : base.beta;
    if (beta.size() != q) throw InvalidArgument("initial beta has wrong length");
    for (Eigen::Index l = 0; l < q; ++l) beta(l) += io.noise_sd * rng_.normal();
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto& b = spec_.blocks[j];
      const Eigen::Index d = b.dim();
      auto bj = beta.segment(off_[j], d);
      bj *= std::min(1.0, std::sqrt(s_.gamma(j) * s_.tau2(j)));
      if (!b.expanded) {
        s_.alpha(j) = 1.0;
        s_.xi.segment(off_[j], d) = bj;
        continue;
      }
      s_.alpha(j) = bj.cwiseAbs().mean();
      if (s_.alpha(j) > 0.0) {
        s_.xi.segment(off_[j], d) = bj / s_.alpha(j);
      } else {
        for (Eigen::Index l = off_[j]; l < off_[j] + d; ++l)
          s_.xi(l) = rng_.normal(rng_.bernoulli(0.5) ? 1.0 : -1.0, 1.0);
      }
    }
    s_.theta = io.theta ? *io.theta : base.theta;
    if (s_.theta.size() != spec_.fixed_design.cols())
      throw InvalidArgument("initial theta has wrong length");
    update_m();
    refresh_eta();
    if (spec_.family == Family::gaussian) {
      s_.sigma2 = io.sigma2 ? *io.sigma2
                            : std::max((spec_.y - s_.eta).squaredNorm() /
                                           static_cast<double>(spec_.n()),
                                       1e-8);
    } else {
      s_.sigma2 = 1.0;
    }
    theta_exp_ = s_.theta;
    alpha_exp_ = s_.alpha;
    xi_exp_ = s_.xi;
  }

  double log_target(const Eigen::VectorXd& eta, const Eigen::VectorXd& c,
                    const Eigen::VectorXd& pm, const Eigen::VectorXd& pp) const {
    return log_likelihood(spec_.family, eta, spec_.y, s_.sigma2) -
           0.5 * (pp.array() * (c - pm).array().square()).sum();
  }

  CanonicalGaussian proposal(const Eigen::MatrixXd& W, const Eigen::VectorXd& eta_rest,
                             const Eigen::VectorXd& e, const Eigen::VectorXd& pm,
                             const Eigen::VectorXd& pp) const {
    const Eigen::VectorXd We = W * e;
    const auto mom = detail::moments(spec_.family, eta_rest + We);
    const double phi = spec_.family == Family::gaussian ? s_.sigma2 : 1.0;
    const Eigen::VectorXd z = We.array() + (spec_.y - mom.mu).array() / mom.var.array();
    WeightedProblem prob{W, mom.var / phi, z, pm, pp};
    return CanonicalGaussian::from_problem(prob, cfg_.factor);
  }

  /// Updates coefficient vector `cur` with design W (its contribution is
  /// W * cur inside eta) and a diagonal Gaussian prior. Keeps eta in sync.
  Eigen::VectorXd coefficient_step(const Eigen::MatrixXd& W, const Eigen::VectorXd& cur,
                                   const Eigen::VectorXd& pm, const Eigen::VectorXd& pp,
                                   Eigen::VectorXd& expansion, UpdateStats& st) {
    const Eigen::VectorXd eta_rest = s_.eta - W * cur;
    if (!uses_mh()) {
      const Eigen::VectorXd next =
          gaussian_conditional({W, cur, pm, pp, expansion}).draw(rng_);
      ++st.proposals;
      ++st.accepted;
      last_log_accept_ = 0.0;
      s_.eta = eta_rest + W * next;
      return next;
    }

    ++st.proposals;
    try {
      const Eigen::VectorXd e =
          cfg_.expansion == PiwlsExpansion::current_state ? cur : expansion;
      const CanonicalGaussian q = proposal(W, eta_rest, e, pm, pp);
      const Eigen::VectorXd cand = q.draw(rng_);
      const Eigen::VectorXd eta_cand = eta_rest + W * cand;
      double log_rev = 0.0;
      if (cfg_.expansion == PiwlsExpansion::current_state)
        log_rev = proposal(W, eta_rest, cand, pm, pp).log_density(cur);
      else
        log_rev = q.log_density(cur);
      const double la = log_target(eta_cand, cand, pm, pp) - log_target(s_.eta, cur, pm, pp) +
                        log_rev - q.log_density(cand);
      last_log_accept_ = std::min(0.0, la);
      if (cfg_.expansion == PiwlsExpansion::previous_mean) expansion = q.mean();
      if (std::isfinite(la) && std::log(rng_.uniform()) < la) {
        ++st.accepted;
        s_.eta = eta_cand;
        return cand;
      }
    } catch (const SamplerError&) {
      ++st.failures;
      last_log_accept_ = -INFINITY;
      // a degenerate expansion point would fail forever; restart from the state
      if (cfg_.expansion == PiwlsExpansion::previous_mean) expansion = cur;
    }
    return cur;
  }
};

inline ChainOutput run_chain(const ModelSpec& spec, const SamplerConfig& cfg, int chain_id,
                             const InitBase& base) {
  const auto t0 = std::chrono::steady_clock::now();
  ChainOutput out;
  out.chain_id = chain_id;
  out.layout.v0 = spec.hyper.v0;
  out.layout.family = spec.family;
  out.layout.fixed_labels = spec.fixed_labels;
  for (const auto& b : spec.blocks) {
    out.layout.labels.push_back(b.label);
    out.layout.dims.push_back(b.dim());
    out.layout.expanded.push_back(b.expanded);
  }
  const Eigen::Index S = cfg.iterations / cfg.thin;
  const Eigen::Index p = spec.p(), q = spec.q(), k = spec.fixed_design.cols();
  out.alpha.resize(S, p);
  out.gamma.resize(S, p);
  out.tau2.resize(S, p);
  out.xi.resize(S, q);
  out.m.resize(S, q);
  out.beta.resize(S, q);
  out.theta.resize(S, k);
  out.w.resize(S);
  out.sigma2.resize(S);
  try {
    Chain chain(spec, cfg, chain_id, base);
    for (int it = 0; it < cfg.burn_in; ++it) chain.sweep();
    Eigen::Index row = 0;
    for (int it = 1; it <= cfg.iterations; ++it) {
      chain.sweep();
      if (it % cfg.thin != 0) continue;
      const auto& s = chain.state();
      out.alpha.row(row) = s.alpha.transpose();
      out.gamma.row(row) = s.gamma.transpose();
      out.tau2.row(row) = s.tau2.transpose();
      out.xi.row(row) = s.xi.transpose();
      out.m.row(row) = s.m.transpose();
      out.beta.row(row) = stacked_beta(spec, s).transpose();
      out.theta.row(row) = s.theta.transpose();
      out.w(row) = s.w;
      out.sigma2(row) = s.sigma2;
      ++row;
    }
    out.acceptance = chain.stats();
    out.warnings = chain.finish_warnings();
    out.pincl = inclusion_probabilities(out);
  } catch (const std::exception& e) {
    out.failed = true;
    out.failure = e.what();
  }
  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double ess = 0.0;
  double rhat = 0.0;
};

struct PosteriorSummary {
  Eigen::VectorXd pincl;            // pooled Rao-Blackwell estimate
  Eigen::MatrixXd pincl_per_chain;  // p x chains
  Eigen::VectorXd gamma_fraction;
  std::vector<ParameterSummary> beta, theta, alpha;
  std::optional<ParameterSummary> sigma2;
  ParameterSummary w;
  int used_chains = 0;
  int failed_chains = 0;
  double credible_level = 0.8;
};

struct RunResult {
  std::vector<ChainOutput> chains;
  PosteriorSummary summary;
  std::vector<std::string> warnings;
};

namespace detail {

inline ParameterSummary summarize_column(const std::string& name,
                                         const std::vector<const ChainOutput*>& ok,
                                         const Eigen::MatrixXd ChainOutput::*field,
                                         Eigen::Index col, double level) {
  std::vector<Eigen::VectorXd> chains;
  std::vector<double> all;
  for (const auto* c : ok) {
    chains.push_back((c->*field).col(col));
    all.insert(all.end(), chains.back().data(), chains.back().data() + chains.back().size());
  }
  ParameterSummary s;
  s.name = name;
  Eigen::Map<const Eigen::VectorXd> v(all.data(), static_cast<Eigen::Index>(all.size()));
  s.mean = v.mean();
  s.sd = std::sqrt(detail::variance(Eigen::VectorXd(v)));
  s.lower = quantile(all, 0.5 - level / 2.0);
  s.upper = quantile(all, 0.5 + level / 2.0);
  s.ess = effective_sample_size(chains);
  s.rhat = split_rhat(chains);
  return s;
}

inline ParameterSummary summarize_scalar(const std::string& name,
                                         const std::vector<const ChainOutput*>& ok,
                                         const Eigen::VectorXd ChainOutput::*field,
                                         double level) {
  std::vector<Eigen::VectorXd> chains;
  std::vector<double> all;
  for (const auto* c : ok) {
    chains.push_back(c->*field);
    all.insert(all.end(), chains.back().data(), chains.back().data() + chains.back().size());
  }
  ParameterSummary s;
  s.name = name;
  Eigen::Map<const Eigen::VectorXd> v(all.data(), static_cast<Eigen::Index>(all.size()));
  s.mean = v.mean();
  s.sd = std::sqrt(detail::variance(Eigen::VectorXd(v)));
  s.lower = quantile(all, 0.5 - level / 2.0);
  s.upper = quantile(all, 0.5 + level / 2.0);
  s.ess = effective_sample_size(chains);
  s.rhat = split_rhat(chains);
  return s;
}

}  // namespace detail

/// Pools chain outputs; failed chains are excluded.
inline PosteriorSummary summarize(const ModelSpec& spec, const std::vector<ChainOutput>& chains,
                                  double level) {
  PosteriorSummary s;
  s.credible_level = level;
  std::vector<const ChainOutput*> ok;
  for (const auto& c : chains) (c.failed ? s.failed_chains : s.used_chains) += 1;
  for (const auto& c : chains)
    if (!c.failed) ok.push_back(&c);
  if (ok.empty()) return s;
  const Eigen::Index p = spec.p();
  s.pincl_per_chain.resize(p, static_cast<Eigen::Index>(ok.size()));
  s.gamma_fraction = Eigen::VectorXd::Zero(p);
  for (std::size_t c = 0; c < ok.size(); ++c) {
    s.pincl_per_chain.col(static_cast<Eigen::Index>(c)) = ok[c]->pincl;
    s.gamma_fraction += gamma_fraction(*ok[c]);
  }
  s.pincl = s.pincl_per_chain.rowwise().mean();
  s.gamma_fraction /= static_cast<double>(ok.size());

  const auto off = spec.block_offsets();
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& b = spec.blocks[j];
    s.alpha.push_back(detail::summarize_column("alpha[" + b.label + "]", ok,
                                               &ChainOutput::alpha, j, level));
    for (Eigen::Index l = 0; l < b.dim(); ++l)
      s.beta.push_back(detail::summarize_column(b.label + "[" + std::to_string(l + 1) + "]", ok,
                                                &ChainOutput::beta, off[j] + l, level));
  }
  for (Eigen::Index k = 0; k < spec.fixed_design.cols(); ++k) {
    const std::string name = k < static_cast<Eigen::Index>(spec.fixed_labels.size())
                                 ? spec.fixed_labels[k]
                                 : "theta[" + std::to_string(k + 1) + "]";
    s.theta.push_back(detail::summarize_column(name, ok, &ChainOutput::theta, k, level));
  }
  s.w = detail::summarize_scalar("w", ok, &ChainOutput::w, level);
  if (spec.family == Family::gaussian)
    s.sigma2 = detail::summarize_scalar("sigma2", ok, &ChainOutput::sigma2, level);
  return s;
}

/// Runs all chains (concurrently when threads allow) and pools the output.
inline RunResult run_chains(const ModelSpec& spec, const SamplerConfig& cfg) {
  cfg.validate();
  spec.validate();
  RunResult res;
  for (auto& w : spec.hyper.warnings()) res.warnings.push_back(w);
  const InitBase base = fisher_scoring_start(spec, cfg);
  res.chains.resize(static_cast<std::size_t>(cfg.n_chains));
  unsigned nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(cfg.n_chains));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < cfg.n_chains; c = next++)
      res.chains[static_cast<std::size_t>(c)] = run_chain(spec, cfg, c, base);
  };
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& c : res.chains) {
    if (c.failed)
      res.warnings.push_back("E001 chain " + std::to_string(c.chain_id) + " failed: " + c.failure);
    for (const auto& w : c.warnings) res.warnings.push_back(w);
  }
  res.summary = summarize(spec, res.chains, cfg.credible_level);
  return res;
}

}  // namespace starsel

#endif  // STARSEL_SAMPLER_HPP
