#ifndef STARSEL_RESULTS_HPP
#define STARSEL_RESULTS_HPP

// Serialization of fits: summary.json, samples.csv (+ JSON sidecar),
// plotdata/*.csv with pointwise credible bands and log.txt.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "starsel/builder.hpp"
#include "starsel/config.hpp"
#include "starsel/diagnostics.hpp"
#include "starsel/error.hpp"
#include "starsel/sampler.hpp"

namespace starsel {

namespace results_detail {

inline std::string fmt(double x) {
  if (std::isnan(x)) return "NA";
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline nlohmann::json num(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline nlohmann::json param(const ParameterSummary& p) {
  return {{"name", p.name}, {"mean", num(p.mean)}, {"sd", num(p.sd)},     {"lower", num(p.lower)},
          {"upper", num(p.upper)}, {"ess", num(p.ess)}, {"rhat", num(p.rhat)}};
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  f.precision(17);
  return f;
}

inline std::string safe_name(const std::string& s) {
  std::string o;
  for (char c : s) o += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.') ? c : '_';
  return o;
}

}  // namespace results_detail

inline nlohmann::json sampler_json(const SamplerConfig& c) {
  return {{"chains", c.n_chains},
          {"burn_in", c.burn_in},
          {"iterations", c.iterations},
          {"thin", c.thin},
          {"block_size_alpha", c.block_size_alpha},
          {"block_size_xi", c.block_size_xi},
          {"seed", c.seed},
          {"rescale_every", c.rescale_every},
          {"credible_level", c.credible_level}};
}

/// Deterministic summary: no timestamps or timings.
inline nlohmann::json summary_json(const BuiltModel& bm, const RunResult& r, const SamplerConfig& cfg) {
  using results_detail::num;
  using results_detail::param;
  const auto& s = r.summary;
  const auto& spec = bm.spec;
  nlohmann::json j;
  j["family"] = to_string(spec.family);
  j["n"] = spec.n();
  j["model"] = render_model_config(bm.config);
  j["sampler"] = sampler_json(cfg);
  j["chains"] = {{"used", s.used_chains}, {"failed", s.failed_chains}};
  j["credible_level"] = s.credible_level;
  nlohmann::json blocks = nlohmann::json::array();
  const auto off = spec.block_offsets();
  for (Eigen::Index b = 0; b < spec.p(); ++b) {
    const auto& blk = spec.blocks[b];
    nlohmann::json e;
    e["label"] = blk.label;
    e["term"] = blk.parent_label;
    e["kind"] = to_string(blk.kind);
    e["dim"] = blk.dim();
    e["expanded"] = blk.expanded;
    if (s.used_chains > 0) {
      e["pincl"] = num(s.pincl(b));
      std::vector<nlohmann::json> pc;
      for (Eigen::Index c = 0; c < s.pincl_per_chain.cols(); ++c) pc.push_back(num(s.pincl_per_chain(b, c)));
      e["pincl_per_chain"] = pc;
      e["gamma_fraction"] = num(s.gamma_fraction(b));
      e["alpha"] = param(s.alpha[static_cast<std::size_t>(b)]);
      nlohmann::json coef = nlohmann::json::array();
      for (Eigen::Index l = 0; l < blk.dim(); ++l) coef.push_back(param(s.beta[static_cast<std::size_t>(off[b] + l)]));
      e["coefficients"] = coef;
    }
    blocks.push_back(e);
  }
  j["blocks"] = blocks;
  nlohmann::json fixed = nlohmann::json::array();
  for (const auto& t : s.theta) fixed.push_back(param(t));
  j["fixed"] = fixed;
  if (s.used_chains > 0) {
    j["w"] = param(s.w);
    if (s.sigma2) j["sigma2"] = param(*s.sigma2);
  }
  nlohmann::json acc = nlohmann::json::array();
  for (const auto& c : r.chains) {
    nlohmann::json a;
    a["chain"] = c.chain_id;
    a["failed"] = c.failed;
    for (const auto& st : c.acceptance) a["rates"][st.label] = num(st.rate());
    acc.push_back(a);
  }
  j["acceptance"] = acc;
  j["warnings"] = r.warnings;
  return j;
}

/// Column names of samples.csv after the chain/iteration columns.
inline std::vector<std::string> sample_columns(const ModelSpec& spec) {
  std::vector<std::string> cols;
  for (const auto& b : spec.blocks) cols.push_back("alpha[" + b.label + "]");
  for (const auto& b : spec.blocks) cols.push_back("gamma[" + b.label + "]");
  for (const auto& b : spec.blocks) cols.push_back("tau2[" + b.label + "]");
  for (const auto& b : spec.blocks)
    for (Eigen::Index l = 0; l < b.dim(); ++l) cols.push_back(b.label + "[" + std::to_string(l + 1) + "]");
  for (const auto& f : spec.fixed_labels) cols.push_back(f);
  cols.push_back("w");
  if (spec.family == Family::gaussian) cols.push_back("sigma2");
  return cols;
}

inline void write_samples(std::ostream& os, const ModelSpec& spec, const RunResult& r) {
  using results_detail::fmt;
  os << "chain,draw";
  for (const auto& c : sample_columns(spec)) os << ",\"" << c << "\"";
  os << "\n";
  for (const auto& c : r.chains) {
    if (c.failed) continue;
    for (Eigen::Index t = 0; t < c.saved(); ++t) {
      os << c.chain_id << "," << t + 1;
      for (Eigen::Index j = 0; j < c.alpha.cols(); ++j) os << "," << fmt(c.alpha(t, j));
      for (Eigen::Index j = 0; j < c.gamma.cols(); ++j) os << "," << fmt(c.gamma(t, j));
      for (Eigen::Index j = 0; j < c.tau2.cols(); ++j) os << "," << fmt(c.tau2(t, j));
      for (Eigen::Index j = 0; j < c.beta.cols(); ++j) os << "," << fmt(c.beta(t, j));
      for (Eigen::Index j = 0; j < c.theta.cols(); ++j) os << "," << fmt(c.theta(t, j));
      os << "," << fmt(c.w(t));
      if (spec.family == Family::gaussian) os << "," << fmt(c.sigma2(t));
      os << "\n";
    }
  }
}

/// Pointwise posterior summaries of one term's effect on a set of grid rows.
struct EffectCurve {
  std::string term;
  std::vector<std::string> coord_names;
  std::vector<std::vector<std::string>> coords;  // per grid row
  Eigen::VectorXd mean, lower, upper;
};

namespace results_detail {

/// Grid table covering a term's covariates; empty when no grid applies.
inline std::optional<std::pair<DataTable, std::vector<std::vector<std::string>>>> term_grid(
    const TermInfo& info, int points) {
  const auto& s = info.spec;
  DataTable t;
  std::vector<std::vector<std::string>> coords;
  auto numeric_grid = [&](std::size_t k, int m) {
    Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(m, info.lo[k], info.hi[k]);
    return g;
  };
  auto labels_column = [&](const std::string& name, const std::vector<std::string>& lv) {
    Column c;
    c.name = name;
    c.type = ColumnType::factor;
    c.str = lv;
    c.num.assign(lv.size(), 0.0);
    return c;
  };
  if (info.factor && s.kind != TermKind::varying_coefficient) {
    t.columns.push_back(labels_column(s.covariates[0], info.levels));
    for (const auto& l : info.levels) coords.push_back({l});
  } else if (s.kind == TermKind::linear || s.kind == TermKind::pspline) {
    const Eigen::VectorXd g = numeric_grid(0, points);
    t.columns.push_back(numeric_column(s.covariates[0], g));
    for (Eigen::Index i = 0; i < g.size(); ++i) coords.push_back({fmt(g(i))});
  } else if (s.kind == TermKind::tensor_spline) {
    const int m = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(points) * 9.0)));
    const Eigen::VectorXd ga = numeric_grid(0, m), gb = numeric_grid(1, m);
    Eigen::VectorXd a(m * m), b(m * m);
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) {
        a(i * m + k) = ga(i);
        b(i * m + k) = gb(k);
        coords.push_back({fmt(ga(i)), fmt(gb(k))});
      }
    t.columns.push_back(numeric_column(s.covariates[0], a));
    t.columns.push_back(numeric_column(s.covariates[1], b));
  } else if (s.kind == TermKind::varying_coefficient) {
    // coefficient function of the modulating covariate (u = 1)
    if (info.factor) {
      t.columns.push_back(labels_column(s.covariates[0], info.levels));
      for (const auto& l : info.levels) coords.push_back({l});
    } else {
      const Eigen::VectorXd g = numeric_grid(0, points);
      t.columns.push_back(numeric_column(s.covariates[0], g));
      for (Eigen::Index i = 0; i < g.size(); ++i) coords.push_back({fmt(g(i))});
    }
    t.columns.push_back(numeric_column(s.covariates[1], Eigen::VectorXd::Ones(static_cast<Eigen::Index>(coords.size()))));
  } else {
    return std::nullopt;
  }
  return std::make_pair(std::move(t), std::move(coords));
}

}  // namespace results_detail

inline std::vector<EffectCurve> effect_curves(const BuiltModel& bm, const RunResult& r, double level,
                                              int points = 100) {
  std::vector<EffectCurve> out;
  const auto off = bm.spec.block_offsets();
  for (const auto& info : bm.terms) {
    auto grid = results_detail::term_grid(info, points);
    if (!grid) continue;
    const Eigen::MatrixXd Z = raw_design(info, grid->first);
    const auto G = static_cast<Eigen::Index>(grid->second.size());
    std::vector<std::vector<double>> draws(static_cast<std::size_t>(G));
    for (const auto& c : r.chains) {
      if (c.failed) continue;
      Eigen::MatrixXd f = Eigen::MatrixXd::Zero(G, c.saved());
      for (std::size_t k = 0; k < info.blocks.size(); ++k) {
        const Eigen::MatrixXd X = info.blocks[k].apply(Z);
        if (info.block_index[k] >= 0)
          f += X * c.beta.middleCols(off[info.block_index[k]], X.cols()).transpose();
        else
          f += X * c.theta.middleCols(info.fixed_column[k], X.cols()).transpose();
      }
      for (Eigen::Index g = 0; g < G; ++g)
        for (Eigen::Index t = 0; t < f.cols(); ++t) draws[static_cast<std::size_t>(g)].push_back(f(g, t));
    }
    if (draws.empty() || draws.front().empty()) continue;
    EffectCurve ec;
    ec.term = info.spec.label;
    ec.coord_names = info.spec.covariates;
    if (info.spec.kind == TermKind::varying_coefficient) ec.coord_names.pop_back();
    ec.coords = grid->second;
    ec.mean.resize(G);
    ec.lower.resize(G);
    ec.upper.resize(G);
    for (Eigen::Index g = 0; g < G; ++g) {
      const auto& d = draws[static_cast<std::size_t>(g)];
      double m = 0.0;
      for (double v : d) m += v;
      ec.mean(g) = m / static_cast<double>(d.size());
      ec.lower(g) = quantile(d, 0.5 - level / 2.0);
      ec.upper(g) = quantile(d, 0.5 + level / 2.0);
    }
    out.push_back(std::move(ec));
  }
  return out;
}

inline void write_curve(std::ostream& os, const EffectCurve& c) {
  using results_detail::fmt;
  for (const auto& n : c.coord_names) os << n << ",";
  os << "mean,lower,upper\n";
  for (std::size_t g = 0; g < c.coords.size(); ++g) {
    for (const auto& v : c.coords[g]) os << v << ",";
    const auto i = static_cast<Eigen::Index>(g);
    os << fmt(c.mean(i)) << "," << fmt(c.lower(i)) << "," << fmt(c.upper(i)) << "\n";
  }
}

/// Log lines: INFO entries, then one coded line per warning.
inline std::vector<std::string> log_lines(const RunResult& r, const std::vector<std::string>& info) {
  std::vector<std::string> lines;
  for (const auto& i : info) lines.push_back("INFO " + i);
  for (const auto& c : r.chains) {
    std::ostringstream os;
    os.precision(4);
    os << "INFO chain " << c.chain_id << (c.failed ? " failed" : " finished") << " in "
       << c.runtime_seconds << " s";
    for (const auto& st : c.acceptance) os << "; " << st.label << " acceptance " << st.rate();
    lines.push_back(os.str());
  }
  for (const auto& w : r.warnings) lines.push_back((w.rfind("E", 0) == 0 ? "ERROR " : "WARN ") + w);
  return lines;
}

/// Writes the full result set into `dir`.
inline void emit_results(const BuiltModel& bm, const RunResult& r, const SamplerConfig& cfg,
                         const std::filesystem::path& dir, const std::vector<std::string>& info = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "plotdata", ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  {
    auto f = results_detail::open_out(dir / "summary.json");
    f << summary_json(bm, r, cfg).dump(2) << "\n";
  }
  {
    auto f = results_detail::open_out(dir / "samples.csv");
    write_samples(f, bm.spec, r);
  }
  {
    nlohmann::json side;
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : bm.spec.blocks)
      blocks.push_back({{"label", b.label}, {"term", b.parent_label}, {"dim", b.dim()}});
    side["blocks"] = blocks;
    side["fixed"] = bm.spec.fixed_labels;
    side["columns"] = sample_columns(bm.spec);
    side["model"] = render_model_config(bm.config);
    side["sampler"] = sampler_json(cfg);
    auto f = results_detail::open_out(dir / "samples.json");
    f << side.dump(2) << "\n";
  }
  for (const auto& c : effect_curves(bm, r, cfg.credible_level)) {
    auto f = results_detail::open_out(dir / "plotdata" / (results_detail::safe_name(c.term) + ".csv"));
    write_curve(f, c);
  }
  auto f = results_detail::open_out(dir / "log.txt");
  for (const auto& l : log_lines(r, info)) f << l << "\n";
}

}  // namespace starsel

#endif  // STARSEL_RESULTS_HPP
