#ifndef STARSEL_BUILDER_HPP
#define STARSEL_BUILDER_HPP

// Turns a model configuration and a data table into a ModelSpec, keeping
// enough per-term state to evaluate the same designs on new data.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "starsel/config.hpp"
#include "starsel/data.hpp"
#include "starsel/error.hpp"
#include "starsel/model.hpp"
#include "starsel/reparam.hpp"
#include "starsel/terms.hpp"

namespace starsel {

struct BuildOptions {
  // Penalized blocks are centered and kept orthogonal to their null space so
  // they do not compete with the intercept.
  DecomposeOptions decompose{.coverage = 0.995, .project_out_null = true};
  std::filesystem::path base_dir;  // resolves relative neighbor files
};

/// Per-term state fitted on the training data.
struct TermInfo {
  TermSpec spec;
  bool factor = false;                 // first covariate used as labels
  std::vector<double> center, scale;   // per standardized covariate
  std::vector<double> lo, hi;          // training range per numeric covariate, original scale
  std::optional<BSplineBasis> basis_a, basis_b;
  std::vector<std::string> levels;
  Eigen::MatrixXd penalty;
  std::vector<DesignBlock> blocks;     // after scaling; X holds training rows
  std::vector<int> block_index;        // position in ModelSpec::blocks, -1 if fixed
  std::vector<int> fixed_column;       // first theta column for fixed blocks, -1 otherwise
};

struct BuiltModel {
  ModelConfig config;
  ModelSpec spec;
  std::vector<TermInfo> terms;
};

namespace builder_detail {

inline std::vector<std::string> sorted_levels(const std::vector<std::string>& values) {
  auto lv = factor_levels(values);
  bool numeric = true;
  for (const auto& l : lv) numeric = numeric && detail::parse_double(l).has_value();
  if (numeric)
    std::sort(lv.begin(), lv.end(), [](const std::string& a, const std::string& b) {
      return *detail::parse_double(a) < *detail::parse_double(b);
    });
  return lv;
}

/// Edge list file: one "a,b" pair per line (an optional header is skipped).
inline Eigen::MatrixXd adjacency_from_file(const std::filesystem::path& path,
                                           std::vector<std::string>& levels) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open neighbor file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line, line_no);
    if (cells.size() != 2)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected two fields");
    if (line_no == 1 && cells[0] == "from") continue;
    edges.emplace_back(cells[0], cells[1]);
  }
  std::vector<std::string> all = levels;
  for (const auto& [a, b] : edges) {
    all.push_back(a);
    all.push_back(b);
  }
  levels = sorted_levels(all);
  std::map<std::string, Eigen::Index> idx;
  for (std::size_t i = 0; i < levels.size(); ++i) idx[levels[i]] = static_cast<Eigen::Index>(i);
  const auto R = static_cast<Eigen::Index>(levels.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(R, R);
  for (const auto& [a, b] : edges) {
    if (a == b) continue;
    A(idx[a], idx[b]) = A(idx[b], idx[a]) = 1.0;
  }
  return A;
}

inline bool is_factor(const DataTable& t, const std::string& name) {
  return t.column(name).type == ColumnType::factor;
}

}  // namespace builder_detail

/// Raw design of a fitted term evaluated on (possibly new) data.
inline Eigen::MatrixXd raw_design(const TermInfo& info, const DataTable& t) {
  const auto& s = info.spec;
  auto standardized = [&](std::size_t k) {
    Eigen::VectorXd x = t.numeric(s.covariates[k]);
    return Eigen::VectorXd((x.array() - info.center[k]) / info.scale[k]);
  };
  auto indicators = [&]() { return indicator_matrix(t.labels(s.covariates[0]), info.levels); };
  switch (s.kind) {
    case TermKind::linear:
      return info.factor ? indicators() : Eigen::MatrixXd(standardized(0));
    case TermKind::pspline: return info.basis_a->evaluate(standardized(0));
    case TermKind::mrf:
    case TermKind::random_intercept: return indicators();
    case TermKind::varying_coefficient: {
      const Eigen::MatrixXd base = s.base == TermKind::mrf ? indicators()
                                                           : info.basis_a->evaluate(standardized(0));
      const Eigen::VectorXd u = t.numeric(s.covariates[1]);
      return u.asDiagonal() * base;
    }
    case TermKind::tensor_spline:
      return row_kronecker(info.basis_a->evaluate(standardized(0)),
                           info.basis_b->evaluate(standardized(1)));
  }
  throw InvalidArgument("unsupported term kind");
}

/// Fits term state (standardization, knots, levels, penalty) on training data.
inline TermInfo fit_term(const TermSpec& s, const DataTable& t, const BuildOptions& opt) {
  s.validate();
  TermInfo info;
  info.spec = s;
  for (const auto& c : s.covariates)
    if (!t.has(c)) throw DataError("term '" + s.label + "' uses unknown column '" + c + "'");
  auto standardize = [&](std::size_t k) {
    const Eigen::VectorXd x = t.numeric(s.covariates[k]);
    const double mean = x.mean();
    const double sd = std::sqrt((x.array() - mean).square().sum() / std::max<double>(1, x.size() - 1));
    if (!(sd > 0.0)) throw DataError("column '" + s.covariates[k] + "' is constant");
    info.center.resize(k + 1);
    info.scale.resize(k + 1);
    info.center[k] = mean;
    info.scale[k] = sd;
    info.lo.resize(k + 1);
    info.hi.resize(k + 1);
    info.lo[k] = x.minCoeff();
    info.hi[k] = x.maxCoeff();
    return Eigen::VectorXd((x.array() - mean) / sd);
  };
  const int nb = s.effective_num_basis();
  const int order = s.effective_penalty_order();
  switch (s.kind) {
    case TermKind::linear:
      info.factor = builder_detail::is_factor(t, s.covariates[0]);
      if (info.factor) {
        info.levels = builder_detail::sorted_levels(t.labels(s.covariates[0]));
        if (info.levels.size() < 2) throw DataError("factor '" + s.covariates[0] + "' has one level");
      } else {
        standardize(0);
      }
      info.penalty = Eigen::MatrixXd::Zero(info.factor ? static_cast<Eigen::Index>(info.levels.size()) : 1,
                                           info.factor ? static_cast<Eigen::Index>(info.levels.size()) : 1);
      break;
    case TermKind::pspline:
      info.basis_a.emplace(standardize(0), nb, s.spline_degree);
      info.penalty = difference_penalty(order, nb);
      break;
    case TermKind::random_intercept:
      info.factor = true;
      info.levels = builder_detail::sorted_levels(t.labels(s.covariates[0]));
      if (info.levels.size() < 2) throw DataError("random intercept needs at least two groups");
      info.penalty = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(info.levels.size()),
                                               static_cast<Eigen::Index>(info.levels.size()));
      break;
    case TermKind::mrf:
    case TermKind::varying_coefficient:
      if (s.kind == TermKind::mrf || s.base == TermKind::mrf) {
        info.factor = true;
        info.levels = builder_detail::sorted_levels(t.labels(s.covariates[0]));
        Eigen::MatrixXd A;
        if (s.neighbors == "path") {
          A = path_adjacency(static_cast<int>(info.levels.size()));
        } else {
          std::filesystem::path p(s.neighbors);
          if (p.is_relative() && !opt.base_dir.empty()) p = opt.base_dir / p;
          A = builder_detail::adjacency_from_file(p, info.levels);
        }
        info.penalty = mrf_precision(A);
        if (order != 1) {
          // higher-order MRF on a path: difference penalty over ordered levels
          if (s.neighbors != "path")
            throw InvalidArgument("term '" + s.label + "': order > 1 needs path neighbors");
          info.penalty = difference_penalty(order, static_cast<int>(info.levels.size()));
        }
      } else {
        info.basis_a.emplace(standardize(0), nb, s.spline_degree);
        info.penalty = difference_penalty(order, nb);
      }
      break;
    case TermKind::tensor_spline:
      info.basis_a.emplace(standardize(0), nb, s.spline_degree);
      info.basis_b.emplace(standardize(1), nb, s.spline_degree);
      info.penalty = tensor_penalty(difference_penalty(order, nb), difference_penalty(order, nb));
      break;
  }
  return info;
}

inline std::string block_label(const TermSpec& s, BlockKind k) {
  if (k == BlockKind::null_space) return "lin(" + s.label + ")";
  switch (s.kind) {
    case TermKind::mrf: return "mrf(" + s.label + ")";
    case TermKind::random_intercept: return "re(" + s.label + ")";
    default: return "sm(" + s.label + ")";
  }
}

/// Builds the model. Each block is scaled to squared Frobenius norm n.
inline BuiltModel build_model(const ModelConfig& cfg, const DataTable& t, const BuildOptions& opt = {}) {
  BuiltModel bm;
  bm.config = cfg;
  const auto n = static_cast<Eigen::Index>(t.rows());
  if (n == 0) throw DataError("data table has no rows");
  ModelSpec& spec = bm.spec;
  spec.family = cfg.family;
  spec.hyper = cfg.hyper;
  if (!t.has(cfg.response)) throw DataError("response column '" + cfg.response + "' not found");
  spec.y = t.numeric(cfg.response);
  validate_response(cfg.family, spec.y);
  spec.offsets = cfg.offset ? t.numeric(*cfg.offset) : Eigen::VectorXd::Zero(n);

  std::vector<Eigen::VectorXd> fixed_cols{Eigen::VectorXd::Ones(n)};
  spec.fixed_labels = {"(Intercept)"};
  for (std::size_t ti = 0; ti < cfg.terms.size(); ++ti) {
    const TermSpec& s = cfg.terms[ti];
    TermInfo info = fit_term(s, t, opt);
    RawTerm raw = make_raw_term(raw_design(info, t), info.penalty);
    Decomposition dec;
    try {
      dec = decompose(raw, opt.decompose);
    } catch (const Error& e) {
      throw DegenerateBasis("term '" + s.label + "': " + e.what());
    }
    for (auto* part : {&dec.X0, &dec.Xpen}) {
      if (!*part) continue;
      DesignBlock b = std::move(**part);
      b.label = block_label(s, b.kind);
      b.parent_term = static_cast<int>(ti);
      b.parent_label = s.label;
      b.selectable = s.selectable;
      b.expanded = s.expanded;
      const double fro = b.X.squaredNorm();
      if (!(fro > 0.0)) throw DegenerateBasis("block '" + b.label + "' is zero");
      b.scale_by(std::sqrt(static_cast<double>(n) / fro));
      if (s.selectable) {
        info.block_index.push_back(static_cast<int>(spec.blocks.size()));
        info.fixed_column.push_back(-1);
        spec.blocks.push_back(b);
      } else {
        info.block_index.push_back(-1);
        info.fixed_column.push_back(static_cast<int>(fixed_cols.size()));
        for (Eigen::Index c = 0; c < b.dim(); ++c) {
          fixed_cols.push_back(b.X.col(c));
          spec.fixed_labels.push_back(b.label + "[" + std::to_string(c + 1) + "]");
        }
      }
      info.blocks.push_back(std::move(b));
    }
    bm.terms.push_back(std::move(info));
  }
  spec.fixed_design.resize(n, static_cast<Eigen::Index>(fixed_cols.size()));
  for (std::size_t c = 0; c < fixed_cols.size(); ++c)
    spec.fixed_design.col(static_cast<Eigen::Index>(c)) = fixed_cols[c];
  spec.validate();
  return bm;
}

/// Block designs and fixed design of a built model evaluated on new data.
struct NewDesign {
  std::vector<Eigen::MatrixXd> blocks;  // aligned with ModelSpec::blocks
  Eigen::MatrixXd fixed;
  Eigen::VectorXd offsets;
};

inline NewDesign evaluate_design(const BuiltModel& bm, const DataTable& t) {
  const auto n = static_cast<Eigen::Index>(t.rows());
  NewDesign nd;
  nd.blocks.resize(bm.spec.blocks.size());
  nd.fixed = Eigen::MatrixXd::Zero(n, bm.spec.fixed_design.cols());
  nd.fixed.col(0).setOnes();
  for (const auto& info : bm.terms) {
    const Eigen::MatrixXd Z = raw_design(info, t);
    for (std::size_t k = 0; k < info.blocks.size(); ++k) {
      Eigen::MatrixXd X = info.blocks[k].apply(Z);
      if (info.block_index[k] >= 0) nd.blocks[info.block_index[k]] = std::move(X);
      else nd.fixed.middleCols(info.fixed_column[k], X.cols()) = X;
    }
  }
  nd.offsets = bm.config.offset ? t.numeric(*bm.config.offset) : Eigen::VectorXd::Zero(n);
  return nd;
}

/// Linear predictor on new data for given stacked beta and theta.
inline Eigen::VectorXd predict_eta(const BuiltModel& bm, const NewDesign& nd,
                                   const Eigen::VectorXd& beta, const Eigen::VectorXd& theta) {
  Eigen::VectorXd eta = nd.fixed * theta + nd.offsets;
  const auto off = bm.spec.block_offsets();
  for (std::size_t j = 0; j < nd.blocks.size(); ++j)
    eta += nd.blocks[j] * beta.segment(off[j], nd.blocks[j].cols());
  return eta;
}

/// Convenience: a table from a numeric matrix with the given column names.
inline DataTable table_from_matrix(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != X.cols()) throw InvalidArgument("name count mismatch");
  DataTable t;
  for (Eigen::Index k = 0; k < X.cols(); ++k) t.columns.push_back(numeric_column(names[k], X.col(k)));
  return t;
}

/// One P-spline term per covariate, as used by the simulation studies.
inline ModelConfig additive_config(const std::vector<std::string>& covariates, Family family,
                                   const Hyperparams& hyper = {}) {
  ModelConfig c;
  c.family = family;
  c.hyper = hyper;
  for (const auto& v : covariates) {
    TermSpec s;
    s.kind = TermKind::pspline;
    s.label = v;
    s.covariates = {v};
    c.terms.push_back(s);
  }
  return c;
}

}  // namespace starsel

#endif  // STARSEL_BUILDER_HPP
