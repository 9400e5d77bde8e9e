#include "bracket/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bracket/csv.hpp"
#include "bracket/errors.hpp"
#include "bracket/estimators.hpp"
#include "bracket/inference.hpp"
#include "bracket/parallel.hpp"
#include "bracket/rng.hpp"
#include "bracket/svg.hpp"

namespace bracket {

namespace {

constexpr double kBandZ = 1.96;  // pointwise 95% normal quantile

// ---------------------------------------------------------------------------
// Piecewise polynomial machinery.

struct CellModel {
  Eigen::VectorXd coef;      // centered-power coefficients; empty = mean-only fallback
  Eigen::MatrixXd gram_inv;  // (X'X)^{-1} for the centered design
  double center = 0.0;
  double mean = 0.0;   // fallback value
  double s2 = 0.0;     // residual variance estimate
  std::size_t count = 0;
  bool fallback = false;
};

struct PiecewiseFit {
  std::vector<double> breaks;  // interior boundaries, ascending
  std::vector<CellModel> cells;
  std::size_t degree = 1;
  std::vector<std::string> warnings;
};

std::size_t cell_of(const std::vector<double>& breaks, double x) {
  return static_cast<std::size_t>(
      std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin());
}

std::size_t auto_bin_count(std::size_t n) {
  const double grown = std::ceil(std::pow(static_cast<double>(n), 0.2));
  return static_cast<std::size_t>(std::max(grown, 2.0));
}

PiecewiseFit fit_piecewise(const std::vector<double>& xs, const std::vector<double>& ys,
                           const SeriesConfig& cfg) {
  if (xs.size() != ys.size()) {
    throw PreconditionError("series fit needs matching xs/ys lengths");
  }
  const std::size_t n = xs.size();
  const std::size_t p = cfg.degree + 1;
  if (n < p) {
    throw PreconditionError("series fit needs at least degree+1 points");
  }
  const auto [min_it, max_it] = std::minmax_element(xs.begin(), xs.end());
  if (*min_it == *max_it) {
    throw DegenerateSampleError("series fit: all x values identical (degenerate support)");
  }

  std::vector<double> sorted_x = xs;
  std::sort(sorted_x.begin(), sorted_x.end());

  PiecewiseFit fit;
  fit.degree = cfg.degree;
  const std::size_t requested = cfg.n_bins > 0 ? cfg.n_bins : auto_bin_count(n);

  // Quantile partition; shrink the cell count until every cell holds at
  // least degree+1 points (one cell always qualifies given n >= p).
  std::vector<std::size_t> counts;
  for (std::size_t nb = requested;; --nb) {
    fit.breaks.clear();
    for (std::size_t k = 1; k < nb; ++k) {
      fit.breaks.push_back(sorted_x[(k * n) / nb]);
    }
    fit.breaks.erase(std::unique(fit.breaks.begin(), fit.breaks.end()), fit.breaks.end());
    counts.assign(fit.breaks.size() + 1, 0);
    for (const double x : xs) ++counts[cell_of(fit.breaks, x)];
    const bool ok = std::all_of(counts.begin(), counts.end(),
                                [&](std::size_t c) { return c >= p; });
    if (ok) {
      if (nb < requested) {
        fit.warnings.push_back("reduced partition from " + std::to_string(requested) +
                               " to " + std::to_string(counts.size()) +
                               " cells so each holds at least " + std::to_string(p) +
                               " points");
      }
      break;
    }
    if (nb == 1) throw PreconditionError("series fit: too few points per cell");
  }

  const std::size_t n_cells = counts.size();
  fit.cells.resize(n_cells);

  // Cell centers: midpoint of each cell's data range, for numerical balance.
  std::vector<double> cell_min(n_cells, 0.0), cell_max(n_cells, 0.0);
  std::vector<bool> seen(n_cells, false);
  for (const double x : xs) {
    const std::size_t c = cell_of(fit.breaks, x);
    if (!seen[c]) {
      cell_min[c] = cell_max[c] = x;
      seen[c] = true;
    } else {
      cell_min[c] = std::min(cell_min[c], x);
      cell_max[c] = std::max(cell_max[c], x);
    }
  }

  for (std::size_t c = 0; c < n_cells; ++c) {
    fit.cells[c].center = 0.5 * (cell_min[c] + cell_max[c]);
    fit.cells[c].count = counts[c];
  }

  // Accumulate per-cell normal equations in input order (deterministic).
  std::vector<Eigen::MatrixXd> gram(n_cells,
                                    Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                                          static_cast<Eigen::Index>(p)));
  std::vector<Eigen::VectorXd> moment(n_cells,
                                      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)));
  std::vector<double> ysum(n_cells, 0.0);
  Eigen::VectorXd z(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = cell_of(fit.breaks, xs[i]);
    const double dx = xs[i] - fit.cells[c].center;
    double pw = 1.0;
    for (std::size_t j = 0; j < p; ++j) {
      z(static_cast<Eigen::Index>(j)) = pw;
      pw *= dx;
    }
    gram[c].noalias() += z * z.transpose();
    moment[c].noalias() += ys[i] * z;
    ysum[c] += ys[i];
  }

  bool any_fallback = false;
  for (std::size_t c = 0; c < n_cells; ++c) {
    CellModel& cell = fit.cells[c];
    cell.mean = ysum[c] / static_cast<double>(cell.count);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram[c]);
    lu.setThreshold(1e-10);
    if (lu.rank() < static_cast<Eigen::Index>(p)) {
      cell.fallback = true;
      any_fallback = true;
    } else {
      cell.coef = lu.solve(moment[c]);
      cell.gram_inv = lu.inverse();
    }
  }
  if (any_fallback) {
    fit.warnings.push_back(
        "one or more cells lacked x variation for the requested degree; "
        "fitted a constant there");
  }

  // Residual variance per cell (second pass).
  std::vector<double> rss(n_cells, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = cell_of(fit.breaks, xs[i]);
    const CellModel& cell = fit.cells[c];
    double pred;
    if (cell.fallback) {
      pred = cell.mean;
    } else {
      const double dx = xs[i] - cell.center;
      pred = 0.0;
      double pw = 1.0;
      for (std::size_t j = 0; j < p; ++j) {
        pred += cell.coef(static_cast<Eigen::Index>(j)) * pw;
        pw *= dx;
      }
    }
    const double r = ys[i] - pred;
    rss[c] += r * r;
  }
  for (std::size_t c = 0; c < n_cells; ++c) {
    CellModel& cell = fit.cells[c];
    const std::size_t dof_used = cell.fallback ? 1 : p;
    cell.s2 = cell.count > dof_used
                  ? rss[c] / static_cast<double>(cell.count - dof_used)
                  : 0.0;
  }
  return fit;
}

void evaluate_piecewise(const PiecewiseFit& fit, const std::vector<double>& grid,
                        CurveFit* out) {
  const std::size_t p = fit.degree + 1;
  out->grid = grid;
  out->fitted.resize(grid.size());
  out->band_lo.resize(grid.size());
  out->band_hi.resize(grid.size());
  out->cell_breaks = fit.breaks;
  out->n_bins = fit.cells.size();
  out->degree = fit.degree;
  out->warnings = fit.warnings;

  Eigen::VectorXd z(static_cast<Eigen::Index>(p));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const std::size_t c = cell_of(fit.breaks, grid[g]);
    const CellModel& cell = fit.cells[c];
    double value, var;
    if (cell.fallback) {
      value = cell.mean;
      var = cell.s2 / static_cast<double>(cell.count);
    } else {
      const double dx = grid[g] - cell.center;
      double pw = 1.0;
      for (std::size_t j = 0; j < p; ++j) {
        z(static_cast<Eigen::Index>(j)) = pw;
        pw *= dx;
      }
      value = z.dot(cell.coef);
      var = cell.s2 * z.dot(cell.gram_inv * z);
    }
    const double se = std::sqrt(std::max(var, 0.0));
    out->fitted[g] = value;
    out->band_lo[g] = value - kBandZ * se;
    out->band_hi[g] = value + kBandZ * se;
  }
}

std::vector<double> equally_spaced(double lo, double hi, std::size_t count) {
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return grid;
}

void split_lag_outcome(const CanonicalDataset& ds, int w, std::vector<double>* xs,
                       std::vector<double>* y0, std::vector<double>* trend) {
  for (const auto& rec : ds.records) {
    if (rec.w != w) continue;
    xs->push_back(rec.y_lag);
    if (y0) y0->push_back(rec.y0);
    if (trend) trend->push_back(rec.y1 - rec.y0);
  }
}

// ---------------------------------------------------------------------------
// Multivariate machinery for check_assumption2.

struct MultiSample {
  std::size_t arity = 0;
  std::size_t n0 = 0, n1 = 0;
  std::vector<double> c_raw, t_raw;  // row-major
  std::vector<double> c_std, t_std;  // standardized by control-sample sd
  std::vector<double> y0_c, y0_t;
  std::vector<double> trend_c;
};

void standardize(MultiSample* s) {
  s->c_std = s->c_raw;
  s->t_std = s->t_raw;
  for (std::size_t c = 0; c < s->arity; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < s->n0; ++i) mean += s->c_raw[i * s->arity + c];
    mean /= static_cast<double>(s->n0);
    double ss = 0.0;
    for (std::size_t i = 0; i < s->n0; ++i) {
      const double d = s->c_raw[i * s->arity + c] - mean;
      ss += d * d;
    }
    const double sd = s->n0 > 1 ? std::sqrt(ss / static_cast<double>(s->n0 - 1)) : 0.0;
    if (sd <= 0.0) continue;
    const double inv = 1.0 / sd;
    for (std::size_t i = 0; i < s->n0; ++i) s->c_std[i * s->arity + c] *= inv;
    for (std::size_t i = 0; i < s->n1; ++i) s->t_std[i * s->arity + c] *= inv;
  }
}

MultiSample build_multisample(const CanonicalDataset& ds) {
  MultiSample s;
  s.arity = 1 + ds.covariate_arity();
  for (const auto& rec : ds.records) {
    auto push_row = [&](std::vector<double>* dst) {
      dst->push_back(rec.y_lag);
      for (const double v : rec.covariates) dst->push_back(v);
    };
    if (rec.w == 1) {
      push_row(&s.t_raw);
      s.y0_t.push_back(rec.y0);
      ++s.n1;
    } else {
      push_row(&s.c_raw);
      s.y0_c.push_back(rec.y0);
      s.trend_c.push_back(rec.y1 - rec.y0);
      ++s.n0;
    }
  }
  standardize(&s);
  return s;
}

MultiSample resample_multisample(const MultiSample& base, rng::Stream* stream) {
  MultiSample s;
  s.arity = base.arity;
  s.n0 = base.n0;
  s.n1 = base.n1;
  s.c_raw.reserve(base.c_raw.size());
  s.y0_c.reserve(base.n0);
  s.trend_c.reserve(base.n0);
  for (std::size_t i = 0; i < base.n0; ++i) {
    const std::size_t j = stream->next_below(base.n0);
    for (std::size_t c = 0; c < s.arity; ++c) s.c_raw.push_back(base.c_raw[j * s.arity + c]);
    s.y0_c.push_back(base.y0_c[j]);
    s.trend_c.push_back(base.trend_c[j]);
  }
  s.t_raw.reserve(base.t_raw.size());
  s.y0_t.reserve(base.n1);
  for (std::size_t i = 0; i < base.n1; ++i) {
    const std::size_t j = stream->next_below(base.n1);
    for (std::size_t c = 0; c < s.arity; ++c) s.t_raw.push_back(base.t_raw[j * s.arity + c]);
    s.y0_t.push_back(base.y0_t[j]);
  }
  standardize(&s);
  return s;
}

/// Evenly strided subset of 0..n-1, at most cap indices.
std::vector<std::size_t> stride_subset(std::size_t n, std::size_t cap) {
  std::vector<std::size_t> idx;
  if (n == 0 || cap == 0) return idx;
  const std::size_t m = std::min(n, cap);
  idx.reserve(m);
  for (std::size_t i = 0; i < m; ++i) idx.push_back((i * n) / m);
  return idx;
}

std::vector<double> gather_rows(const std::vector<double>& rows, std::size_t arity,
                                const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size() * arity);
  for (const std::size_t i : idx) {
    for (std::size_t c = 0; c < arity; ++c) out.push_back(rows[i * arity + c]);
  }
  return out;
}

bool leq_componentwise(const double* a, const double* b, std::size_t arity) {
  for (std::size_t c = 0; c < arity; ++c) {
    if (a[c] > b[c]) return false;
  }
  return true;
}

struct MultiViolations {
  double selection = 0.0;
  double dominance = 0.0;
  double monotonicity = 0.0;
  bool monotonicity_defined = true;
};

MultiViolations compute_violations(const MultiSample& s, double bandwidth,
                                   std::size_t max_points) {
  MultiViolations v;
  const MethodSpec ll{MethodKind::LocalLinear, 1, bandwidth, false};

  // (i) predicted pre-period outcome, control fit vs treated fit, at treated
  // points: positive gap means treated predicted above controls.
  const std::vector<std::size_t> t_idx = stride_subset(s.n1, max_points);
  const std::vector<double> eval_t = gather_rows(s.t_std, s.arity, t_idx);
  const FitResult from_c = counterfactual_fit(s.c_std, s.arity, s.y0_c, eval_t, ll);
  const FitResult from_t = counterfactual_fit(s.t_std, s.arity, s.y0_t, eval_t, ll);
  double worst = 0.0;
  for (std::size_t i = 0; i < from_c.predictions.size(); ++i) {
    worst = std::max(worst, from_t.predictions[i] - from_c.predictions[i]);
  }
  v.selection = worst;

  // (ii) multivariate empirical-CDF dominance at pooled sample points.
  std::vector<double> pooled = s.c_raw;
  pooled.insert(pooled.end(), s.t_raw.begin(), s.t_raw.end());
  const std::vector<std::size_t> pool_idx = stride_subset(s.n0 + s.n1, max_points);
  const std::vector<double> eval_pool = gather_rows(pooled, s.arity, pool_idx);
  v.dominance = multivariate_dominance_violation(s.c_raw, s.t_raw, s.arity, eval_pool);

  // (iii) trend fit at control points; any increase along a componentwise
  // ordered pair is a violation.
  const std::vector<std::size_t> c_idx = stride_subset(s.n0, max_points);
  const std::vector<double> eval_c = gather_rows(s.c_std, s.arity, c_idx);
  const FitResult phi = counterfactual_fit(s.c_std, s.arity, s.trend_c, eval_c, ll);
  double worst_increase = 0.0;
  bool any_pair = false;
  for (std::size_t a = 0; a < c_idx.size(); ++a) {
    const double* xa = &s.c_raw[c_idx[a] * s.arity];
    for (std::size_t b = 0; b < c_idx.size(); ++b) {
      if (a == b) continue;
      const double* xb = &s.c_raw[c_idx[b] * s.arity];
      if (!leq_componentwise(xa, xb, s.arity)) continue;
      bool equal = true;
      for (std::size_t c = 0; c < s.arity; ++c) {
        if (xa[c] != xb[c]) {
          equal = false;
          break;
        }
      }
      if (equal) continue;
      any_pair = true;
      worst_increase = std::max(worst_increase, phi.predictions[b] - phi.predictions[a]);
    }
  }
  v.monotonicity = worst_increase;
  v.monotonicity_defined = any_pair;
  return v;
}

Verdict epsilon_verdict(double violation, double epsilon) {
  if (violation == 0.0) return Verdict::Supported;
  if (violation > epsilon) return Verdict::Violated;
  return Verdict::Ambiguous;
}

}  // namespace

std::string verdict_label(Verdict v) {
  switch (v) {
    case Verdict::Supported: return "Supported";
    case Verdict::Ambiguous: return "Ambiguous";
    case Verdict::Violated: return "Violated";
  }
  return "Ambiguous";
}

std::string dominance_verdict_label(Verdict v) {
  return v == Verdict::Supported ? "DominanceSupported" : verdict_label(v);
}

std::string monotonicity_verdict_label(Verdict v) {
  return v == Verdict::Supported ? "DecreasingSupported" : verdict_label(v);
}

CurveFit series_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                    const SeriesConfig& cfg) {
  const PiecewiseFit fit = fit_piecewise(xs, ys, cfg);
  const auto [min_it, max_it] = std::minmax_element(xs.begin(), xs.end());
  CurveFit out;
  evaluate_piecewise(fit, equally_spaced(*min_it, *max_it, 101), &out);
  return out;
}

CurveFit series_fit_on_grid(const std::vector<double>& xs, const std::vector<double>& ys,
                            const SeriesConfig& cfg, const std::vector<double>& grid) {
  if (grid.empty()) throw PreconditionError("evaluation grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw PreconditionError("evaluation grid must be strictly increasing");
    }
  }
  const PiecewiseFit fit = fit_piecewise(xs, ys, cfg);
  CurveFit out;
  evaluate_piecewise(fit, grid, &out);
  return out;
}

SelectionReport check_negative_selection(const CanonicalDataset& ds,
                                         const SeriesConfig& cfg) {
  std::vector<double> x_c, y_c, x_t, y_t;
  split_lag_outcome(ds, 0, &x_c, &y_c, nullptr);
  split_lag_outcome(ds, 1, &x_t, &y_t, nullptr);
  const std::size_t need = 2 * (cfg.degree + 1);
  if (x_c.size() < need || x_t.size() < need) {
    throw PreconditionError("selection check needs at least " + std::to_string(need) +
                            " points per group");
  }
  const double lo = std::max(*std::min_element(x_c.begin(), x_c.end()),
                             *std::min_element(x_t.begin(), x_t.end()));
  const double hi = std::min(*std::max_element(x_c.begin(), x_c.end()),
                             *std::max_element(x_t.begin(), x_t.end()));
  if (!(lo < hi)) {
    throw DegenerateSampleError("selection check: groups share no common lag support");
  }
  const std::vector<double> grid = equally_spaced(lo, hi, 101);

  SelectionReport report;
  report.control_fit = series_fit_on_grid(x_c, y_c, cfg, grid);
  report.treated_fit = series_fit_on_grid(x_t, y_t, cfg, grid);

  double max_gap = -std::numeric_limits<double>::infinity();
  bool separated = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    max_gap = std::max(max_gap, report.treated_fit.fitted[g] - report.control_fit.fitted[g]);
    if (report.treated_fit.band_lo[g] > report.control_fit.band_hi[g]) separated = true;
  }
  report.max_gap = max_gap;
  if (max_gap <= 0.0) {
    report.verdict = Verdict::Supported;
  } else if (separated) {
    report.verdict = Verdict::Violated;
  } else {
    report.verdict = Verdict::Ambiguous;
  }
  return report;
}

FosdReport check_fosd(const CanonicalDataset& ds, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw PreconditionError("dominance check requires alpha in (0, 1)");
  }
  std::vector<double> x_c, x_t;
  split_lag_outcome(ds, 0, &x_c, nullptr, nullptr);
  split_lag_outcome(ds, 1, &x_t, nullptr, nullptr);
  if (x_c.empty() || x_t.empty()) {
    throw PreconditionError("dominance check requires both groups nonempty");
  }
  std::sort(x_c.begin(), x_c.end());
  std::sort(x_t.begin(), x_t.end());

  FosdReport report;
  report.grid.reserve(x_c.size() + x_t.size());
  std::merge(x_c.begin(), x_c.end(), x_t.begin(), x_t.end(),
             std::back_inserter(report.grid));
  report.grid.erase(std::unique(report.grid.begin(), report.grid.end()), report.grid.end());

  report.cdf_control.resize(report.grid.size());
  report.cdf_treated.resize(report.grid.size());
  std::size_t ic = 0, it = 0;
  double worst = 0.0;
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    const double v = report.grid[g];
    while (ic < x_c.size() && x_c[ic] <= v) ++ic;
    while (it < x_t.size() && x_t[it] <= v) ++it;
    report.cdf_control[g] = static_cast<double>(ic) / static_cast<double>(x_c.size());
    report.cdf_treated[g] = static_cast<double>(it) / static_cast<double>(x_t.size());
    worst = std::max(worst, report.cdf_control[g] - report.cdf_treated[g]);
  }
  report.max_violation = std::max(worst, 0.0);
  report.dkw_epsilon_sum = dkw_epsilon(x_c.size(), alpha) + dkw_epsilon(x_t.size(), alpha);
  report.verdict = epsilon_verdict(report.max_violation, report.dkw_epsilon_sum);
  return report;
}

MonotonicityReport check_phi_monotone(const CanonicalDataset& ds, const SeriesConfig& cfg) {
  std::vector<double> x_c, trend_c;
  split_lag_outcome(ds, 0, &x_c, nullptr, &trend_c);
  const std::size_t need = 2 * (cfg.degree + 1);
  if (x_c.size() < need) {
    throw PreconditionError("trend monotonicity check needs at least " +
                            std::to_string(need) + " control points");
  }

  MonotonicityReport report;
  report.curve = series_fit(x_c, trend_c, cfg);

  double max_inc = -std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t g = 0; g + 1 < report.curve.grid.size(); ++g) {
    const double inc = report.curve.fitted[g + 1] - report.curve.fitted[g];
    if (inc > max_inc) {
      max_inc = inc;
      arg = g;
    }
  }
  report.max_increase = max_inc;
  report.band_width_at_max =
      std::max(report.curve.band_hi[arg] - report.curve.band_lo[arg],
               report.curve.band_hi[arg + 1] - report.curve.band_lo[arg + 1]);

  // Global least-squares slope of the control trend on the lag.
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x_c.size(); ++i) {
    mx += x_c[i];
    my += trend_c[i];
  }
  mx /= static_cast<double>(x_c.size());
  my /= static_cast<double>(x_c.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x_c.size(); ++i) {
    sxx += (x_c[i] - mx) * (x_c[i] - mx);
    sxy += (x_c[i] - mx) * (trend_c[i] - my);
  }
  report.slope = sxx > 0.0 ? sxy / sxx : 0.0;

  if (report.max_increase <= 0.0) {
    report.verdict = Verdict::Supported;
  } else if (report.max_increase > report.band_width_at_max) {
    report.verdict = Verdict::Violated;
  } else {
    report.verdict = Verdict::Ambiguous;
  }
  return report;
}

double multivariate_dominance_violation(const std::vector<double>& control_x,
                                        const std::vector<double>& treated_x,
                                        std::size_t arity,
                                        const std::vector<double>& eval_x) {
  if (arity == 0) throw PreconditionError("dominance check requires arity >= 1");
  const std::size_t n0 = control_x.size() / arity;
  const std::size_t n1 = treated_x.size() / arity;
  const std::size_t ne = eval_x.size() / arity;
  if (n0 == 0 || n1 == 0) {
    throw PreconditionError("dominance check requires both groups nonempty");
  }
  std::vector<double> excess(ne, 0.0);
  parallel_for(ne, [&](std::size_t e) {
    const double* pt = &eval_x[e * arity];
    std::size_t below_c = 0, below_t = 0;
    for (std::size_t i = 0; i < n0; ++i) {
      if (leq_componentwise(&control_x[i * arity], pt, arity)) ++below_c;
    }
    for (std::size_t i = 0; i < n1; ++i) {
      if (leq_componentwise(&treated_x[i * arity], pt, arity)) ++below_t;
    }
    excess[e] = static_cast<double>(below_c) / static_cast<double>(n0) -
                static_cast<double>(below_t) / static_cast<double>(n1);
  });
  double worst = 0.0;
  for (const double v : excess) worst = std::max(worst, v);
  return std::max(worst, 0.0);
}

Assumption2Report check_assumption2(const CanonicalDataset& ds, double alpha,
                                    const Assumption2Config& cfg) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw PreconditionError("assumption check requires alpha in (0, 1)");
  }
  if (ds.records.empty()) throw PreconditionError("dataset is empty");

  Assumption2Report report;

  if (ds.covariate_arity() == 0) {
    // Scalar path: delegate to the dedicated univariate checks so verdicts
    // agree with them exactly.
    const SelectionReport sel = check_negative_selection(ds, cfg.series);
    const FosdReport fosd = check_fosd(ds, alpha);
    const MonotonicityReport mono = check_phi_monotone(ds, cfg.series);
    report.selection = sel.verdict;
    report.selection_violation = std::max(sel.max_gap, 0.0);
    report.selection_epsilon = 0.0;
    report.dominance = fosd.verdict;
    report.dominance_violation = fosd.max_violation;
    report.dominance_epsilon = fosd.dkw_epsilon_sum;
    report.monotonicity = mono.verdict;
    report.monotonicity_violation = std::max(mono.max_increase, 0.0);
    report.monotonicity_epsilon = mono.band_width_at_max;
    report.n_points_used = ds.records.size();
    report.warnings.push_back(
        "no covariates: scalar checks applied; the selection check uses "
        "pointwise bands rather than a single epsilon");
    return report;
  }

  const MultiSample sample = build_multisample(ds);
  if (sample.n0 < 2 || sample.n1 < 2) {
    throw PreconditionError("assumption check needs at least 2 units per group");
  }
  const double bandwidth =
      cfg.bandwidth > 0.0
          ? cfg.bandwidth
          : std::pow(static_cast<double>(sample.n0),
                     -1.0 / static_cast<double>(sample.arity + 4));

  const MultiViolations base = compute_violations(sample, bandwidth, cfg.max_points);
  report.selection_violation = std::max(base.selection, 0.0);
  report.dominance_violation = base.dominance;
  report.monotonicity_violation = std::max(base.monotonicity, 0.0);
  report.n_points_used = std::min(sample.n0 + sample.n1, cfg.max_points);
  if (!base.monotonicity_defined) {
    report.warnings.push_back(
        "no componentwise-ordered point pairs; trend monotonicity is undecidable");
  }

  // Bootstrap spread of each statistic, used as the violation scale. Only
  // needed for statistics that are strictly positive on the full sample.
  const bool need_boot = cfg.n_boot > 0 &&
                         (report.selection_violation > 0.0 ||
                          report.dominance_violation > 0.0 ||
                          (base.monotonicity_defined && report.monotonicity_violation > 0.0));
  if (need_boot) {
    struct Row {
      double sel = 0.0, dom = 0.0, mono = 0.0;
      bool ok = false, mono_ok = false;
    };
    std::vector<Row> rows(cfg.n_boot);
    parallel_for(cfg.n_boot, [&](std::size_t b) {
      rng::Stream stream(cfg.seed, static_cast<std::uint64_t>(b));
      try {
        const MultiSample rs = resample_multisample(sample, &stream);
        const MultiViolations v = compute_violations(rs, bandwidth, cfg.max_points);
        rows[b].sel = v.selection;
        rows[b].dom = v.dominance;
        rows[b].mono = v.monotonicity;
        rows[b].mono_ok = v.monotonicity_defined;
        rows[b].ok = true;
      } catch (const ComputationError&) {
        rows[b].ok = false;
      }
    });
    std::vector<double> sel_dev, dom_dev, mono_dev;
    std::size_t n_failed = 0;
    for (const auto& row : rows) {
      if (!row.ok) {
        ++n_failed;
        continue;
      }
      sel_dev.push_back(std::abs(row.sel - base.selection));
      dom_dev.push_back(std::abs(row.dom - base.dominance));
      if (row.mono_ok) mono_dev.push_back(std::abs(row.mono - base.monotonicity));
    }
    if (n_failed > 0) {
      report.warnings.push_back(std::to_string(n_failed) +
                                " bootstrap replicates failed and were dropped");
    }
    const double q = 1.0 - alpha;
    if (!sel_dev.empty()) report.selection_epsilon = sample_quantile(sel_dev, q);
    if (!dom_dev.empty()) report.dominance_epsilon = sample_quantile(dom_dev, q);
    if (!mono_dev.empty()) report.monotonicity_epsilon = sample_quantile(mono_dev, q);
  }

  report.selection = epsilon_verdict(report.selection_violation, report.selection_epsilon);
  report.dominance = epsilon_verdict(report.dominance_violation, report.dominance_epsilon);
  if (!base.monotonicity_defined) {
    report.monotonicity = Verdict::Ambiguous;
  } else {
    report.monotonicity =
        epsilon_verdict(report.monotonicity_violation, report.monotonicity_epsilon);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Exports.

void write_curve_csv(const CurveFit& curve, const std::string& path) {
  csv::Table table;
  table.header = {"grid", "fitted", "band_lo", "band_hi"};
  for (std::size_t g = 0; g < curve.grid.size(); ++g) {
    table.rows.push_back({csv::format_double(curve.grid[g]),
                          csv::format_double(curve.fitted[g]),
                          csv::format_double(curve.band_lo[g]),
                          csv::format_double(curve.band_hi[g])});
  }
  csv::write_table(path, table);
}

void write_selection_csv(const SelectionReport& report, const std::string& path) {
  csv::Table table;
  table.header = {"grid",          "control_fitted", "control_band_lo", "control_band_hi",
                  "treated_fitted", "treated_band_lo", "treated_band_hi"};
  for (std::size_t g = 0; g < report.control_fit.grid.size(); ++g) {
    table.rows.push_back({csv::format_double(report.control_fit.grid[g]),
                          csv::format_double(report.control_fit.fitted[g]),
                          csv::format_double(report.control_fit.band_lo[g]),
                          csv::format_double(report.control_fit.band_hi[g]),
                          csv::format_double(report.treated_fit.fitted[g]),
                          csv::format_double(report.treated_fit.band_lo[g]),
                          csv::format_double(report.treated_fit.band_hi[g])});
  }
  csv::write_table(path, table);
}

void write_fosd_csv(const FosdReport& report, const std::string& path) {
  csv::Table table;
  table.header = {"grid", "cdf_control", "cdf_treated"};
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    table.rows.push_back({csv::format_double(report.grid[g]),
                          csv::format_double(report.cdf_control[g]),
                          csv::format_double(report.cdf_treated[g])});
  }
  csv::write_table(path, table);
}

void write_selection_svg(const SelectionReport& report, const std::string& path) {
  svg::Series control{"control fit", report.control_fit.grid, report.control_fit.fitted,
                      report.control_fit.band_lo, report.control_fit.band_hi, "#1f77b4",
                      false};
  svg::Series treated{"treated fit", report.treated_fit.grid, report.treated_fit.fitted,
                      report.treated_fit.band_lo, report.treated_fit.band_hi, "#d62728",
                      false};
  svg::write_file(svg::render_line_chart("Pre-period outcome by lagged outcome",
                                         "lagged outcome", "pre-period outcome",
                                         {control, treated}),
                  path);
}

void write_fosd_svg(const FosdReport& report, const std::string& path) {
  svg::Series control{"control ECDF", report.grid, report.cdf_control, {}, {}, "#1f77b4",
                      true};
  svg::Series treated{"treated ECDF", report.grid, report.cdf_treated, {}, {}, "#d62728",
                      true};
  svg::write_file(svg::render_line_chart("Lagged-outcome ECDFs", "lagged outcome",
                                         "cumulative probability", {control, treated}),
                  path);
}

void write_monotonicity_svg(const MonotonicityReport& report, const std::string& path) {
  svg::Series curve{"control trend fit", report.curve.grid, report.curve.fitted,
                    report.curve.band_lo, report.curve.band_hi, "#2ca02c", false};
  svg::write_file(svg::render_line_chart("Control trend by lagged outcome",
                                         "lagged outcome", "outcome change", {curve}),
                  path);
}

}  // namespace bracket
