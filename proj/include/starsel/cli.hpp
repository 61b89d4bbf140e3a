#ifndef STARSEL_CLI_HPP
#define STARSEL_CLI_HPP

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "starsel/builder.hpp"
#include "starsel/config.hpp"
#include "starsel/data.hpp"
#include "starsel/results.hpp"
#include "starsel/sampler.hpp"
#include "starsel/shrinkage.hpp"
#include "starsel/simlab.hpp"

namespace starsel {

enum ExitCode { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_sampler = 3 };

namespace cli_detail {

namespace fs = std::filesystem;
using results_detail::fmt;

struct SamplerFlags {
  int chains = 8;
  int iters = 5000;
  int burnin = 500;
  int thin = 5;
  std::uint64_t seed = 1;
  unsigned threads = 0;

  SamplerConfig config() const {
    SamplerConfig c;
    c.n_chains = chains;
    c.iterations = iters;
    c.burn_in = burnin;
    c.thin = thin;
    c.seed = seed;
    c.threads = threads;
    return c;
  }
};

struct HyperFlags {
  std::optional<double> v0, atau, btau, aw, bw;

  void apply(Hyperparams& h) const {
    if (v0) h.v0 = *v0;
    if (atau) h.a_tau = *atau;
    if (btau) h.b_tau = *btau;
    if (aw) h.a_w = *aw;
    if (bw) h.b_w = *bw;
  }
};

inline void add_sampler_flags(CLI::App* app, SamplerFlags& f) {
  app->add_option("--chains", f.chains, "number of chains")->check(CLI::PositiveNumber);
  app->add_option("--iters", f.iters, "iterations after burn-in")->check(CLI::PositiveNumber);
  app->add_option("--burnin", f.burnin, "burn-in iterations")->check(CLI::NonNegativeNumber);
  app->add_option("--thin", f.thin, "thinning interval")->check(CLI::PositiveNumber);
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--threads", f.threads, "worker threads (0: all cores)");
}

inline void add_hyper_flags(CLI::App* app, HyperFlags& f) {
  app->add_option("--v0", f.v0, "spike variance ratio");
  app->add_option("--atau", f.atau, "shape of tau^2");
  app->add_option("--btau", f.btau, "scale of tau^2");
  app->add_option("--aw", f.aw, "beta prior of w, first parameter");
  app->add_option("--bw", f.bw, "beta prior of w, second parameter");
}

inline std::string read_text(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw DataError("cannot read '" + p.string() + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

inline std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto v = detail::parse_double(detail::trim(cell));
    if (!v) throw InvalidArgument(std::string("cannot parse ") + what + " entry '" + cell + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw InvalidArgument(std::string("empty ") + what + " list");
  return out;
}

/// Columns referenced by the config, response and offset included.
inline std::set<std::string> referenced(const ModelConfig& cfg) {
  std::set<std::string> r{cfg.response};
  if (cfg.offset) r.insert(*cfg.offset);
  for (const auto& t : cfg.terms) r.insert(t.covariates.begin(), t.covariates.end());
  return r;
}

inline void require_complete(const DataTable& t, const std::set<std::string>& cols) {
  for (const auto& name : cols) {
    const Column* c = t.find(name);
    if (!c) continue;
    std::size_t miss = 0, first = 0;
    for (std::size_t i = c->size(); i-- > 0;)
      if (c->missing(i)) {
        ++miss;
        first = i;
      }
    if (miss)
      throw DataError("column '" + name + "' has " + std::to_string(miss) +
                      " missing cell(s), first at data row " + std::to_string(first + 1) +
                      "; use --preprocess uci to drop incomplete rows");
  }
}

inline Eigen::VectorXd posterior_means(const std::vector<ParameterSummary>& v) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i)) = v[i].mean;
  return m;
}

inline RunResult fit_and_emit(const BuiltModel& bm, const SamplerConfig& sc, const fs::path& out,
                              std::vector<std::string> info) {
  info.push_back("n = " + std::to_string(bm.spec.n()) + ", selectable blocks = " + std::to_string(bm.spec.p()) +
                 ", fixed columns = " + std::to_string(bm.spec.fixed_design.cols()));
  RunResult r = run_chains(bm.spec, sc);
  emit_results(bm, r, sc, out, info);
  return r;
}

inline int sampler_status(const RunResult& r) {
  if (r.summary.used_chains == 0) {
    std::cerr << "error: all chains failed; see log.txt\n";
    return exit_sampler;
  }
  return exit_ok;
}

// fit ----------------------------------------------------------------------

struct FitArgs {
  std::string data, model, out = "starsel_out", preprocess;
  SamplerFlags sampler;
  HyperFlags hyper;
};

inline int run_fit(const FitArgs& a) {
  const std::string text = read_text(a.model);
  parse_model_config(text);
  DataTable t = read_csv_file(a.data);
  ModelConfig cfg = parse_model_config(text, t.names());
  a.hyper.apply(cfg.hyper);
  cfg.hyper.validate();
  std::vector<std::string> info{"data " + a.data + ": " + std::to_string(t.rows()) + " rows"};
  if (a.preprocess == "uci") {
    PreprocessOptions po;
    po.exclude.insert(cfg.response);
    if (cfg.offset) po.exclude.insert(*cfg.offset);
    for (auto& l : preprocess_uci(t, po)) info.push_back("preprocess: " + l);
  } else {
    require_complete(t, referenced(cfg));
  }
  BuildOptions bo;
  bo.base_dir = fs::path(a.model).parent_path();
  const BuiltModel bm = build_model(cfg, t, bo);
  const RunResult r = fit_and_emit(bm, a.sampler.config(), a.out, info);
  return sampler_status(r);
}

// simulate -----------------------------------------------------------------

struct SimulateArgs {
  std::string family = "gaussian", sparsity = "high", correlation = "iid", out = "starsel_sim";
  double rho = 0.7, snr = 5.0, concurvity_c = 0.0;
  int n = 200, n_test = 5000, concurvity = 0;
  std::uint64_t replicate = 1;
  bool no_overdispersion = false, fit = false;
  SamplerFlags sampler;
  HyperFlags hyper;
};

inline Family family_arg(const std::string& s) {
  if (auto f = family_from_string(s)) return *f;
  throw InvalidArgument("unknown family '" + s + "'");
}

inline ScenarioSpec scenario_spec(const SimulateArgs& a) {
  ScenarioSpec s;
  s.family = family_arg(a.family);
  s.sparsity = a.sparsity == "low" ? Sparsity::low : Sparsity::high;
  s.correlation = a.correlation == "ar1" ? Correlation::ar1 : Correlation::iid_uniform;
  s.rho = a.rho;
  s.n = a.n;
  s.snr = a.snr;
  s.overdispersion = !a.no_overdispersion;
  s.replicate_seed = a.replicate;
  s.n_test = a.n_test;
  if (a.concurvity) s.concurvity = ConcurvitySpec{a.concurvity, a.concurvity_c, a.snr};
  s.validate();
  return s;
}

inline DataTable sim_table(const Scenario& sc, const SimData& d) {
  DataTable t = table_from_matrix(d.X, sc.names);
  t.columns.push_back(numeric_column("y", d.y));
  t.columns.push_back(numeric_column("eta", d.eta));
  return t;
}

inline int run_simulate(const SimulateArgs& a) {
  const ScenarioSpec spec = scenario_spec(a);
  const Scenario sc = generate_scenario(spec);
  const fs::path out = a.out;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory '" + out.string() + "': " + ec.message());
  {
    auto f = results_detail::open_out(out / "train.csv");
    write_csv(f, sim_table(sc, sc.train));
  }
  {
    auto f = results_detail::open_out(out / "test.csv");
    write_csv(f, sim_table(sc, sc.test));
  }
  Hyperparams hyper;
  a.hyper.apply(hyper);
  hyper.validate();
  const ModelConfig cfg = additive_config(sc.names, spec.family, hyper);
  {
    auto f = results_detail::open_out(out / "model.cfg");
    f << render_model_config(cfg);
  }
  nlohmann::json truth;
  truth["family"] = to_string(spec.family);
  truth["n"] = spec.n;
  truth["replicate"] = spec.replicate_seed;
  truth["sigma2"] = sc.sigma2;
  nlohmann::json flags = nlohmann::json::array();
  std::size_t k = 0;
  for (const auto& name : sc.names)
    for (const char* part : {"lin", "sm"}) flags.push_back({{"block", std::string(part) + "(" + name + ")"}, {"true", bool(sc.truth[k++])}});
  truth["blocks"] = flags;
  if (!a.fit) {
    auto f = results_detail::open_out(out / "truth.json");
    f << truth.dump(2) << "\n";
    return exit_ok;
  }
  const DataTable train = sim_table(sc, sc.train);
  const BuiltModel bm = build_model(cfg, train);
  const RunResult r = fit_and_emit(bm, a.sampler.config(), out / "fit", {"simulated scenario"});
  if (const int st = sampler_status(r); st != exit_ok) return st;
  const auto sel = select_terms(r.summary.pincl);
  const auto cm = complexity_metrics(sel, sc.truth);
  truth["accuracy"] = results_detail::num(cm.accuracy);
  truth["sensitivity"] = results_detail::num(cm.sensitivity);
  truth["specificity"] = results_detail::num(cm.specificity);
  if (spec.n_test > 0) {
    const NewDesign nd = evaluate_design(bm, sim_table(sc, sc.test));
    const Eigen::VectorXd eta = predict_eta(bm, nd, posterior_means(r.summary.beta), posterior_means(r.summary.theta));
    DevianceExtras ex;
    if (r.summary.sigma2) ex.sigma2 = r.summary.sigma2->mean;
    truth["predictive_deviance"] = results_detail::num(predictive_deviance(spec.family, sc.test.y, eta, ex));
  }
  auto f = results_detail::open_out(out / "truth.json");
  f << truth.dump(2) << "\n";
  return exit_ok;
}

// shrinkage-study -----------------------------------------------------------

struct ShrinkageArgs {
  std::string out = "starsel_shrinkage";
  double lo = -3.0, hi = 3.0;
  int points = 301;
  int density_points = 400;
  double density_max = 20.0;
  HyperFlags hyper;
};

inline int run_shrinkage(const ShrinkageArgs& a) {
  Hyperparams h;
  h.a_tau = 5.0;
  h.b_tau = 50.0;
  h.v0 = 0.005;
  a.hyper.apply(h);
  h.validate();
  const fs::path out = a.out;
  fs::create_directories(out);
  {
    // symmetric grid without zero, where the peNMIG density is unbounded
    std::vector<double> g;
    for (double x : linspace(0.0, a.density_max, a.density_points + 1)) if (x > 0.0) g.push_back(x);
    std::vector<double> grid;
    for (auto it = g.rbegin(); it != g.rend(); ++it) grid.push_back(-*it);
    grid.insert(grid.end(), g.begin(), g.end());
    const auto pen = penmig_marginal_density(grid, h);
    const double w = prior_weight_mean(h);
    auto f = results_detail::open_out(out / "marginal_density.csv");
    f << "beta,log_penmig,log_nmig\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
      f << fmt(grid[i]) << "," << fmt(pen.log_density[i]) << "," << fmt(std::log(nmig_marginal_density(grid[i], h, w)))
        << "\n";
  }
  const auto grid = linspace(a.lo, a.hi, a.points);
  for (auto mode : {ContourMode::nmig_separate, ContourMode::penmig_separate, ContourMode::penmig_same_block}) {
    const Eigen::MatrixXd z = log_prior_contours(grid, h, mode);
    auto f = results_detail::open_out(out / ("contours_" + to_string(mode) + ".csv"));
    f << "beta1,beta2,log_density\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
      for (std::size_t k = 0; k < grid.size(); ++k)
        f << fmt(grid[i]) << "," << fmt(grid[k]) << ","
          << fmt(z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))) << "\n";
  }
  return exit_ok;
}

// mixing-study --------------------------------------------------------------

struct MixingArgs {
  std::string out = "starsel_mixing";
  std::string dims = "1,5,20", quantiles = "0.1,0.5,0.9";
  double ratio_max = 2.0;
  int ratio_points = 200;
  HyperFlags hyper;
};

inline int run_mixing(const MixingArgs& a) {
  Hyperparams h;
  h.b_tau = 50.0;
  a.hyper.apply(h);
  h.validate();
  const auto dims = parse_list(a.dims, "dimension");
  const auto qs = parse_list(a.quantiles, "quantile");
  if (!(a.ratio_max > 0.0) || a.ratio_points < 2) throw InvalidArgument("ratio grid needs a positive maximum and 2+ points");
  const auto ratios = linspace(a.ratio_max / a.ratio_points, a.ratio_max, a.ratio_points);
  const fs::path out = a.out;
  fs::create_directories(out);
  auto f = results_detail::open_out(out / "transition.csv");
  f << "d,gamma0,quantile,ratio,p_gamma1\n";
  for (double dd : dims) {
    const int d = static_cast<int>(dd);
    if (d != dd || d < 1) throw InvalidArgument("dimensions must be positive integers");
    for (double g0 : {1.0, h.v0})
      for (double q : qs) {
        const auto p = nmig_transition_curve(d, g0, q, ratios, h);
        for (std::size_t i = 0; i < ratios.size(); ++i)
          f << d << "," << fmt(g0) << "," << fmt(q) << "," << fmt(ratios[i]) << "," << fmt(p[i]) << "\n";
      }
  }
  return exit_ok;
}

// pem-fit -------------------------------------------------------------------

struct PemArgs {
  std::string data, model, out = "starsel_pem", time = "time", event = "event", cuts, preprocess;
  int intervals = 8;
  SamplerFlags sampler;
  HyperFlags hyper;
};

inline constexpr const char* kPemInterval = "pem_interval";
inline constexpr const char* kPemLogExposure = "pem_logexp";
inline constexpr const char* kPemEvent = "pem_event";

/// Cutpoints at empirical quantiles of the event times, closed by the largest time.
inline std::vector<double> default_cutpoints(const std::vector<double>& times, const std::vector<bool>& events,
                                             int intervals) {
  std::vector<double> ev;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (events[i]) ev.push_back(times[i]);
  if (ev.empty()) throw DataError("no events observed");
  std::vector<double> k{0.0};
  for (int j = 1; j < intervals; ++j) {
    const double c = quantile(ev, static_cast<double>(j) / intervals);
    if (c > k.back()) k.push_back(c);
  }
  const double tmax = *std::max_element(times.begin(), times.end());
  if (tmax > k.back()) k.push_back(tmax);
  return k;
}

inline int run_pem(const PemArgs& a) {
  ModelConfig cfg = parse_model_config(read_text(a.model));
  a.hyper.apply(cfg.hyper);
  cfg.hyper.validate();
  DataTable t = read_csv_file(a.data);
  for (const char* reserved : {kPemInterval, kPemLogExposure, kPemEvent})
    if (t.has(reserved)) throw DataError(std::string("column name '") + reserved + "' is reserved");
  std::vector<std::string> info{"data " + a.data + ": " + std::to_string(t.rows()) + " subjects"};
  std::set<std::string> cols = referenced(cfg);
  cols.erase(cfg.response);
  cols.insert(a.time);
  cols.insert(a.event);
  if (a.preprocess == "uci") {
    PreprocessOptions po;
    po.exclude = {a.time, a.event};
    for (auto& l : preprocess_uci(t, po)) info.push_back("preprocess: " + l);
  } else {
    require_complete(t, cols);
  }
  const Eigen::VectorXd tv = t.numeric(a.time), ev = t.numeric(a.event);
  std::vector<double> times(tv.data(), tv.data() + tv.size());
  std::vector<bool> events;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) != 0.0 && ev(i) != 1.0) throw DataError("event column must be 0/1");
    events.push_back(ev(i) == 1.0);
  }
  const std::vector<double> kappa = a.cuts.empty() ? default_cutpoints(times, events, a.intervals)
                                                   : parse_list(a.cuts, "cutpoint");
  const PemDataset ds = pem_expand(times, events, kappa);
  info.push_back("expanded to " + std::to_string(ds.rows()) + " subject-interval rows over " +
                 std::to_string(ds.num_intervals()) + " intervals");

  DataTable x;
  for (const auto& c : t.columns) {
    Column r;
    r.name = c.name;
    r.type = c.type;
    for (int s : ds.subject) {
      r.num.push_back(c.num[static_cast<std::size_t>(s)]);
      r.str.push_back(c.str[static_cast<std::size_t>(s)]);
    }
    x.columns.push_back(std::move(r));
  }
  Column iv;
  iv.name = kPemInterval;
  iv.type = ColumnType::factor;
  for (int j : ds.interval) {
    iv.str.push_back(std::to_string(j + 1));
    iv.num.push_back(0.0);
  }
  x.columns.push_back(std::move(iv));
  x.columns.push_back(numeric_column(kPemLogExposure, ds.log_offset()));
  x.columns.push_back(numeric_column(kPemEvent, ds.delta));

  cfg.family = Family::poisson;
  cfg.response = kPemEvent;
  cfg.offset = kPemLogExposure;
  if (ds.num_intervals() > 1) {
    TermSpec base;
    base.kind = TermKind::linear;
    base.label = "baseline";
    base.covariates = {kPemInterval};
    base.selectable = false;
    for (const auto& s : cfg.terms)
      if (s.label == base.label) throw DataError("term label 'baseline' is reserved in pem-fit");
    cfg.terms.push_back(base);
  }
  BuildOptions bo;
  bo.base_dir = fs::path(a.model).parent_path();
  const BuiltModel bm = build_model(cfg, x, bo);
  const RunResult r = fit_and_emit(bm, a.sampler.config(), a.out, info);
  if (const int st = sampler_status(r); st != exit_ok) return st;

  // baseline log-hazard per interval at the centered covariate effects
  const Eigen::VectorXd theta = posterior_means(r.summary.theta);
  std::vector<double> log_base(static_cast<std::size_t>(ds.num_intervals()), theta(0));
  if (ds.num_intervals() > 1) {
    const TermInfo& info_b = bm.terms.back();
    DataTable g;
    Column c;
    c.name = kPemInterval;
    c.type = ColumnType::factor;
    for (int j = 0; j < ds.num_intervals(); ++j) {
      c.str.push_back(std::to_string(j + 1));
      c.num.push_back(0.0);
    }
    g.columns.push_back(std::move(c));
    const Eigen::MatrixXd Z = raw_design(info_b, g);
    for (std::size_t k = 0; k < info_b.blocks.size(); ++k) {
      const Eigen::MatrixXd X = info_b.blocks[k].apply(Z);
      const Eigen::VectorXd add = X * theta.segment(info_b.fixed_column[k], X.cols());
      for (Eigen::Index j = 0; j < add.size(); ++j) log_base[static_cast<std::size_t>(j)] += add(j);
    }
  }
  const NewDesign nd = evaluate_design(bm, x);
  const Eigen::VectorXd eta_rows =
      predict_eta(bm, nd, posterior_means(r.summary.beta), posterior_means(r.summary.theta)) - nd.offsets;
  // covariate part only: subtract the baseline that predict_eta already contains
  Eigen::VectorXd eta_cov = eta_rows;
  for (Eigen::Index i = 0; i < eta_cov.size(); ++i) eta_cov(i) -= log_base[static_cast<std::size_t>(ds.interval[i])];
  Eigen::VectorXd eta_subject = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(times.size()));
  for (Eigen::Index i = 0; i < eta_cov.size(); ++i) eta_subject(ds.subject[i]) = eta_cov(i);

  nlohmann::json j;
  j["cutpoints"] = kappa;
  j["log_baseline_hazard"] = log_base;
  j["subjects"] = times.size();
  j["events"] = std::count(events.begin(), events.end(), true);
  j["log_likelihood_at_posterior_mean"] = results_detail::num(pem_log_likelihood(times, events, kappa, log_base, eta_subject));
  auto f = results_detail::open_out(fs::path(a.out) / "pem.json");
  f << j.dump(2) << "\n";
  return exit_ok;
}

}  // namespace cli_detail

/// Entry point of the command-line tool; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"starsel: Bayesian function selection for structured additive regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "starsel 0.1.0");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "fit a model to a CSV data set");
  fit->add_option("--data", fa.data, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  fit->add_option("--model", fa.model, "model configuration file")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fa.out, "output directory");
  fit->add_option("--preprocess", fa.preprocess, "optional preprocessing pipeline")->check(CLI::IsMember({"uci"}));
  add_sampler_flags(fit, fa.sampler);
  add_hyper_flags(fit, fa.hyper);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "generate a simulation scenario, optionally fit it");
  sim->add_option("--family", sa.family)->check(CLI::IsMember({"gaussian", "binomial", "poisson"}));
  sim->add_option("--sparsity", sa.sparsity)->check(CLI::IsMember({"low", "high"}));
  sim->add_option("--correlation", sa.correlation)->check(CLI::IsMember({"iid", "ar1"}));
  sim->add_option("--rho", sa.rho, "AR(1) correlation");
  sim->add_option("--n", sa.n, "training size");
  sim->add_option("--n-test", sa.n_test, "test size");
  sim->add_option("--snr", sa.snr, "signal-to-noise ratio (gaussian)");
  sim->add_option("--concurvity", sa.concurvity, "concurvity scenario 1-3")->check(CLI::Range(1, 3));
  sim->add_option("--concurvity-c", sa.concurvity_c, "concurvity strength in [0, 1]");
  sim->add_option("--replicate", sa.replicate, "replicate seed");
  sim->add_flag("--no-overdispersion", sa.no_overdispersion, "poisson without overdispersion");
  sim->add_flag("--fit", sa.fit, "fit the additive model and score selection");
  sim->add_option("--out", sa.out, "output directory");
  add_sampler_flags(sim, sa.sampler);
  add_hyper_flags(sim, sa.hyper);

  ShrinkageArgs ha;
  auto* shr = app.add_subcommand("shrinkage-study", "marginal prior densities and log-prior contours");
  shr->add_option("--out", ha.out, "output directory");
  shr->add_option("--grid-lo", ha.lo);
  shr->add_option("--grid-hi", ha.hi);
  shr->add_option("--grid-points", ha.points, "contour points per axis")->check(CLI::Range(2, 2001));
  shr->add_option("--density-max", ha.density_max, "largest |beta| of the marginal density grid");
  shr->add_option("--density-points", ha.density_points)->check(CLI::PositiveNumber);
  add_hyper_flags(shr, ha.hyper);

  MixingArgs ma;
  auto* mix = app.add_subcommand("mixing-study", "indicator transition curves of the unexpanded sampler");
  mix->add_option("--out", ma.out, "output directory");
  mix->add_option("--dims", ma.dims, "comma-separated block dimensions");
  mix->add_option("--quantiles", ma.quantiles, "comma-separated tau^2 quantiles");
  mix->add_option("--ratio-max", ma.ratio_max);
  mix->add_option("--ratio-points", ma.ratio_points);
  add_hyper_flags(mix, ma.hyper);

  PemArgs pa;
  auto* pem = app.add_subcommand("pem-fit", "piecewise exponential survival model via Poisson expansion");
  pem->add_option("--data", pa.data, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  pem->add_option("--model", pa.model, "model configuration (response ignored)")->required()->check(CLI::ExistingFile);
  pem->add_option("--time", pa.time, "survival time column");
  pem->add_option("--event", pa.event, "0/1 event column");
  pem->add_option("--cuts", pa.cuts, "comma-separated cutpoints starting at 0");
  pem->add_option("--intervals", pa.intervals, "intervals for default cutpoints")->check(CLI::PositiveNumber);
  pem->add_option("--out", pa.out, "output directory");
  pem->add_option("--preprocess", pa.preprocess)->check(CLI::IsMember({"uci"}));
  add_sampler_flags(pem, pa.sampler);
  add_hyper_flags(pem, pa.hyper);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*fit) return run_fit(fa);
    if (*sim) return run_simulate(sa);
    if (*shr) return run_shrinkage(ha);
    if (*mix) return run_mixing(ma);
    if (*pem) return run_pem(pa);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_usage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const DegenerateBasis& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const SamplerError& e) {
    err << "sampler error: " << e.what() << "\n";
    return exit_sampler;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data;
  }
  return exit_usage;
}

}  // namespace starsel

#endif  // STARSEL_CLI_HPP
