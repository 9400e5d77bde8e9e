#include "bracket/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bracket/csv.hpp"
#include "bracket/errors.hpp"
#include "bracket/parallel.hpp"
#include "bracket/rng.hpp"

namespace bracket {

namespace {

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw PreconditionError(std::string("parameter ") + name + " must be finite");
  }
}

std::string padded_unit_id(std::size_t index, std::size_t n) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::to_string(n - 1).size();
  return "u" + std::string(width - digits.size(), '0') + digits;
}

// ---------------------------------------------------------------------------
// Lagged-outcome cells shared by identification_errors and condition_check.

struct Cell {
  std::vector<std::size_t> treated;  // indices into panel.units
  std::vector<std::size_t> control;
};

/// Contiguous rank blocks of the pooled y_lag order, closed only at value
/// changes so ties always share a cell. n_bins == 0 means one cell per
/// distinct value.
std::vector<Cell> build_lag_cells(const OraclePanel& panel, std::size_t n_bins) {
  const std::size_t n = panel.units.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return panel.units[a].y_lag < panel.units[b].y_lag;
  });

  std::vector<Cell> cells;
  cells.emplace_back();
  auto boundary_rank = [&](std::size_t k) { return (k * n) / n_bins; };
  std::size_t boundary_index = 1;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    const bool value_changed =
        r > 0 && panel.units[i].y_lag != panel.units[order[r - 1]].y_lag;
    bool open_new = false;
    if (n_bins == 0) {
      open_new = value_changed;
    } else if (value_changed && boundary_index < n_bins && r >= boundary_rank(boundary_index)) {
      open_new = true;
      while (boundary_index < n_bins && boundary_rank(boundary_index) <= r) ++boundary_index;
    }
    if (open_new) cells.emplace_back();
    if (panel.units[i].w == 1) {
      cells.back().treated.push_back(i);
    } else {
      cells.back().control.push_back(i);
    }
  }
  return cells;
}

/// Merges any cell missing a group into its right neighbor (left for the last
/// cell), recording one warning per merge. Throws if a whole group is absent.
std::vector<Cell> merge_one_sided_cells(std::vector<Cell> cells,
                                        std::vector<std::string>& warnings) {
  auto one_sided = [](const Cell& c) { return c.treated.empty() || c.control.empty(); };
  bool changed = true;
  while (changed && cells.size() > 1) {
    changed = false;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (!one_sided(cells[k])) continue;
      const std::size_t into = k + 1 < cells.size() ? k + 1 : k - 1;
      auto& dst = cells[into];
      dst.treated.insert(dst.treated.end(), cells[k].treated.begin(), cells[k].treated.end());
      dst.control.insert(dst.control.end(), cells[k].control.begin(), cells[k].control.end());
      cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(k));
      warnings.push_back("merged a lagged-outcome cell lacking one group into its neighbor");
      changed = true;
      break;
    }
  }
  if (cells.size() == 1 && one_sided(cells.front())) {
    throw PreconditionError("panel must contain both treated and control units");
  }
  return cells;
}

struct GroupStats {
  std::size_t n = 0;
  double mean = 0.0;
  double var = 0.0;  // unbiased; 0 when n < 2
};

template <typename Stat>
GroupStats group_stats(const OraclePanel& panel, const std::vector<std::size_t>& idx,
                       Stat stat) {
  GroupStats g;
  g.n = idx.size();
  if (g.n == 0) return g;
  double sum = 0.0;
  for (const std::size_t i : idx) sum += stat(panel.units[i]);
  g.mean = sum / static_cast<double>(g.n);
  if (g.n >= 2) {
    double ss = 0.0;
    for (const std::size_t i : idx) {
      const double d = stat(panel.units[i]) - g.mean;
      ss += d * d;
    }
    g.var = ss / static_cast<double>(g.n - 1);
  }
  return g;
}

/// Treated-share-weighted mean cell gap and its large-sample standard error.
template <typename Stat>
void weighted_cell_gap(const OraclePanel& panel, const std::vector<Cell>& cells, Stat stat,
                       double* gap, double* se) {
  std::size_t n_treated_total = 0;
  for (const auto& c : cells) n_treated_total += c.treated.size();
  double acc = 0.0;
  double var_acc = 0.0;
  for (const auto& c : cells) {
    const GroupStats t = group_stats(panel, c.treated, stat);
    const GroupStats u = group_stats(panel, c.control, stat);
    const double w = static_cast<double>(t.n) / static_cast<double>(n_treated_total);
    acc += w * (t.mean - u.mean);
    var_acc += w * w *
               (t.var / static_cast<double>(t.n) + u.var / static_cast<double>(u.n));
  }
  *gap = acc;
  *se = std::sqrt(var_acc);
}

/// True when every cell's group gap of stat is within tol standard errors.
template <typename Stat>
bool cells_balanced(const OraclePanel& panel, const std::vector<Cell>& cells, double tol,
                    Stat stat) {
  for (const auto& c : cells) {
    const GroupStats t = group_stats(panel, c.treated, stat);
    const GroupStats u = group_stats(panel, c.control, stat);
    const double se = std::sqrt(t.var / static_cast<double>(t.n) +
                                u.var / static_cast<double>(u.n));
    if (std::abs(t.mean - u.mean) > tol * se) return false;
  }
  return true;
}

double trend_of(const OracleUnit& u) { return u.po_y1_0 - u.po_y0_0; }

}  // namespace

void ParametricDgpSpec::validate() const {
  require_finite(beta, "beta");
  require_finite(gamma, "gamma");
  require_finite(rho, "rho");
  require_finite(delta0, "delta0");
  require_finite(delta1, "delta1");
  require_finite(alpha_sd, "alpha_sd");
  require_finite(eps_sd, "eps_sd");
  require_finite(ylag_mean_treated, "ylag_mean_treated");
  require_finite(ylag_mean_control, "ylag_mean_control");
  require_finite(ylag_sd, "ylag_sd");
  require_finite(p_treated, "p_treated");
  if (alpha_sd < 0.0 || eps_sd < 0.0 || ylag_sd < 0.0) {
    throw PreconditionError("spread parameters must be nonnegative");
  }
  if (!(p_treated > 0.0 && p_treated < 1.0)) {
    throw PreconditionError("p_treated must lie strictly inside (0, 1)");
  }
}

ClosedForms closed_forms(const ParametricDgpSpec& spec) {
  spec.validate();
  ClosedForms cf;
  cf.m = spec.beta + (1.0 + spec.rho) * spec.gamma;
  cf.didm = spec.beta + spec.rho * spec.gamma;
  cf.did = cf.didm +
           spec.rho * (1.0 - spec.rho) * (spec.ylag_mean_control - spec.ylag_mean_treated);
  return cf;
}

CanonicalDataset OraclePanel::observed() const {
  CanonicalDataset ds;
  ds.records.reserve(units.size());
  for (const auto& u : units) {
    UnitRecord rec;
    rec.unit_id = u.unit_id;
    rec.w = u.w;
    rec.y_lag = u.y_lag;
    rec.y0 = u.w == 1 ? u.po_y0_1 : u.po_y0_0;
    rec.y1 = u.w == 1 ? u.po_y1_1 : u.po_y1_0;
    ds.records.push_back(std::move(rec));
  }
  ds.meta.notes.push_back("synthetic panel with oracle potential outcomes");
  return ds;
}

OraclePanel simulate_parametric(const ParametricDgpSpec& spec, std::size_t n,
                                std::uint64_t seed) {
  spec.validate();
  if (n < 2) throw PreconditionError("simulate_parametric requires n >= 2");

  OraclePanel panel;
  panel.units.resize(n);
  parallel_for(n, [&](std::size_t i) {
    rng::Stream stream(seed, static_cast<std::uint64_t>(i));
    OracleUnit& u = panel.units[i];
    u.unit_id = padded_unit_id(i, n);
    u.w = stream.next_bernoulli(spec.p_treated) ? 1 : 0;
    const double lag_mean = u.w == 1 ? spec.ylag_mean_treated : spec.ylag_mean_control;
    u.y_lag = stream.next_normal(lag_mean, spec.ylag_sd);
    const double alpha = stream.next_normal(0.0, spec.alpha_sd);
    const double eps0 = stream.next_normal(0.0, spec.eps_sd);
    const double eps1 = stream.next_normal(0.0, spec.eps_sd);
    // The selection shift gamma*w stays in every branch; only the treatment
    // term beta toggles, and it does so only at t = 1.
    const double base0 = alpha + spec.gamma * u.w + spec.delta0 + spec.rho * u.y_lag + eps0;
    u.po_y0_0 = base0;
    u.po_y0_1 = base0;
    u.po_y1_0 = alpha + spec.gamma * u.w + spec.delta1 + spec.rho * base0 + eps1;
    u.po_y1_1 = u.po_y1_0 + spec.beta;
  });

  double att_sum = 0.0;
  std::size_t n_treated = 0;
  for (const auto& u : panel.units) {
    if (u.w == 1) {
      att_sum += u.po_y1_1 - u.po_y1_0;
      ++n_treated;
    }
  }
  panel.true_att = n_treated > 0 ? att_sum / static_cast<double>(n_treated) : 0.0;
  return panel;
}

CounterexampleKind CounterexampleKind::defaults(FailurePattern pattern) {
  CounterexampleKind kind;
  kind.pattern = pattern;
  if (pattern == FailurePattern::DidmHoldsDidFails) {
    kind.p_pos_treated = 0.25;
    kind.p_pos_control = 0.75;
  }
  return kind;
}

void CounterexampleKind::validate() const {
  require_finite(mu0, "mu0");
  require_finite(mu1, "mu1");
  for (const double p : {p_pos_treated, p_pos_control, p_treated}) {
    if (!(p > 0.0 && p < 1.0)) {
      throw PreconditionError("probabilities must lie strictly inside (0, 1)");
    }
  }
  const bool needs_level_gap = pattern == FailurePattern::MHoldsDidmFails ||
                               pattern == FailurePattern::DidmHoldsMFails;
  if (needs_level_gap && mu0 == mu1) {
    throw PreconditionError("this construction requires distinct group levels mu0 != mu1");
  }
  if (pattern == FailurePattern::DidHoldsDidmFails) {
    const double mean_sum = (2.0 * p_pos_treated - 1.0) + (2.0 * p_pos_control - 1.0);
    if (std::abs(mean_sum) > 1e-12) {
      throw PreconditionError(
          "this construction requires mirror-balanced lag laws: "
          "E[y_lag | treated] + E[y_lag | control] = 0");
    }
  }
}

OraclePanel simulate_counterexample(const CounterexampleKind& kind, std::size_t n,
                                    std::uint64_t seed) {
  kind.validate();
  if (n < 100) throw PreconditionError("simulate_counterexample requires n >= 100");

  OraclePanel panel;
  panel.units.resize(n);
  parallel_for(n, [&](std::size_t i) {
    rng::Stream stream(seed, static_cast<std::uint64_t>(i));
    OracleUnit& u = panel.units[i];
    u.unit_id = padded_unit_id(i, n);
    u.w = stream.next_bernoulli(kind.p_treated) ? 1 : 0;
    const double p_pos = u.w == 1 ? kind.p_pos_treated : kind.p_pos_control;
    u.y_lag = stream.next_bernoulli(p_pos) ? 1.0 : -1.0;
    const double mu = u.w == 1 ? kind.mu1 : kind.mu0;

    switch (kind.pattern) {
      case FailurePattern::MHoldsDidmFails: {
        // Group level enters period 0 only; period 1 is pure noise, so both
        // post-treatment branches are group-free while the trend is not.
        const double e00 = stream.next_normal();
        const double e01 = stream.next_normal();
        const double e10 = stream.next_normal();
        const double e11 = stream.next_normal();
        u.po_y0_0 = mu + e00;
        u.po_y0_1 = mu + e01;
        u.po_y1_0 = e10;
        u.po_y1_1 = e11;
        break;
      }
      case FailurePattern::DidmHoldsMFails: {
        // Group level enters both periods equally: trends are group-free,
        // levels are not.
        const double e00 = stream.next_normal();
        const double e01 = stream.next_normal();
        const double e10 = stream.next_normal();
        const double e11 = stream.next_normal();
        u.po_y0_0 = mu + e00;
        u.po_y0_1 = mu + e01;
        u.po_y1_0 = mu + e10;
        u.po_y1_1 = mu + e11;
        break;
      }
      case FailurePattern::DidmHoldsDidFails: {
        // Trend equals the lag given the lag, but the groups hold the lag
        // with opposite frequencies, so unconditional trends differ.
        // Treatment is inert: both branches coincide.
        const double e0 = stream.next_normal();
        const double nu = stream.next_normal();
        u.po_y0_0 = u.y_lag + e0;
        u.po_y0_1 = u.po_y0_0;
        u.po_y1_0 = 2.0 * u.y_lag + nu;
        u.po_y1_1 = u.po_y1_0;
        break;
      }
      case FailurePattern::DidHoldsDidmFails: {
        // Trend loads on lag-x-group with mirror-balanced lag laws: the
        // conditional trend gap is 2*y_lag but integrates to zero in both
        // groups. Treatment is inert: both branches coincide.
        const double e0 = stream.next_normal();
        const double nu = stream.next_normal();
        u.po_y0_0 = u.y_lag + e0;
        u.po_y0_1 = u.po_y0_0;
        u.po_y1_0 = u.y_lag + (2.0 * u.w - 1.0) * u.y_lag + nu;
        u.po_y1_1 = u.po_y1_0;
        break;
      }
    }
  });

  double att_sum = 0.0;
  std::size_t n_treated = 0;
  for (const auto& u : panel.units) {
    if (u.w == 1) {
      att_sum += u.po_y1_1 - u.po_y1_0;
      ++n_treated;
    }
  }
  panel.true_att = n_treated > 0 ? att_sum / static_cast<double>(n_treated) : 0.0;
  return panel;
}

IdentificationErrors identification_errors(const OraclePanel& panel, std::size_t n_bins) {
  if (n_bins < 1) throw PreconditionError("identification_errors requires n_bins >= 1");
  if (panel.units.empty()) throw PreconditionError("panel is empty");

  IdentificationErrors out;
  std::vector<Cell> cells =
      merge_one_sided_cells(build_lag_cells(panel, n_bins), out.warnings);
  out.n_cells_used = cells.size();

  weighted_cell_gap(panel, cells, [](const OracleUnit& u) { return u.po_y1_0; }, &out.d_m,
                    &out.d_m_se);
  weighted_cell_gap(panel, cells, trend_of, &out.d_didm, &out.d_didm_se);

  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    (panel.units[i].w == 1 ? treated : control).push_back(i);
  }
  const GroupStats t = group_stats(panel, treated, trend_of);
  const GroupStats c = group_stats(panel, control, trend_of);
  out.d_did = t.mean - c.mean;
  out.d_did_se =
      std::sqrt(t.var / static_cast<double>(t.n) + c.var / static_cast<double>(c.n));
  return out;
}

ConditionCheck condition_check(const OraclePanel& panel, double tol) {
  if (panel.units.empty()) throw PreconditionError("panel is empty");
  if (!(tol >= 0.0)) throw PreconditionError("tol must be nonnegative");

  // Exact cells when the lag takes few distinct values; quantile cells with a
  // slow-growing count otherwise.
  std::vector<double> lags;
  lags.reserve(panel.units.size());
  for (const auto& u : panel.units) lags.push_back(u.y_lag);
  std::sort(lags.begin(), lags.end());
  const std::size_t n_distinct =
      static_cast<std::size_t>(std::unique(lags.begin(), lags.end()) - lags.begin());
  std::size_t n_bins = 0;  // exact cells
  if (n_distinct > 32) {
    const double grown = std::ceil(std::pow(static_cast<double>(panel.units.size()), 0.2));
    n_bins = static_cast<std::size_t>(std::clamp(grown, 2.0, 50.0));
  }

  ConditionCheck out;
  std::vector<Cell> cells =
      merge_one_sided_cells(build_lag_cells(panel, n_bins), out.warnings);
  out.n_cells_used = cells.size();

  out.cond_m =
      cells_balanced(panel, cells, tol, [](const OracleUnit& u) { return u.po_y1_0; }) &&
      cells_balanced(panel, cells, tol, [](const OracleUnit& u) { return u.po_y1_1; });
  out.cond_didm = cells_balanced(panel, cells, tol, trend_of);

  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    (panel.units[i].w == 1 ? treated : control).push_back(i);
  }
  const GroupStats t = group_stats(panel, treated, trend_of);
  const GroupStats c = group_stats(panel, control, trend_of);
  const double se =
      std::sqrt(t.var / static_cast<double>(t.n) + c.var / static_cast<double>(c.n));
  out.cond_did = std::abs(t.mean - c.mean) <= tol * se;
  return out;
}

void write_panel_csv(const OraclePanel& panel, const std::string& path) {
  csv::Table table;
  table.header = {"unit_id", "w",       "y_lag",   "y0",      "y1",
                  "po_y0_0", "po_y0_1", "po_y1_0", "po_y1_1"};
  const CanonicalDataset obs = panel.observed();
  table.rows.reserve(panel.units.size());
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    const OracleUnit& u = panel.units[i];
    const UnitRecord& rec = obs.records[i];
    table.rows.push_back({u.unit_id, std::to_string(u.w), csv::format_double(u.y_lag),
                          csv::format_double(rec.y0), csv::format_double(rec.y1),
                          csv::format_double(u.po_y0_0), csv::format_double(u.po_y0_1),
                          csv::format_double(u.po_y1_0), csv::format_double(u.po_y1_1)});
  }
  csv::write_table(path, table);
}

OraclePanel read_panel_csv(const std::string& path) {
  const csv::Table table = csv::read_table(path);
  const char* names[] = {"unit_id", "w",       "y_lag",   "y0",      "y1",
                         "po_y0_0", "po_y0_1", "po_y1_0", "po_y1_1"};
  int cols[9];
  for (int c = 0; c < 9; ++c) {
    cols[c] = table.column(names[c]);
    if (cols[c] < 0) {
      throw SchemaError(path + ": missing required column '" + names[c] + "'");
    }
  }
  OraclePanel panel;
  panel.units.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    OracleUnit u;
    u.unit_id = row[static_cast<std::size_t>(cols[0])];
    u.w = csv::parse_int(row[static_cast<std::size_t>(cols[1])], r + 2, "w");
    if (u.w != 0 && u.w != 1) {
      throw DomainError("row " + std::to_string(r + 2) + ": w = " + std::to_string(u.w) +
                        " outside {0,1}");
    }
    u.y_lag = csv::parse_double(row[static_cast<std::size_t>(cols[2])], r + 2, "y_lag");
    u.po_y0_0 = csv::parse_double(row[static_cast<std::size_t>(cols[5])], r + 2, "po_y0_0");
    u.po_y0_1 = csv::parse_double(row[static_cast<std::size_t>(cols[6])], r + 2, "po_y0_1");
    u.po_y1_0 = csv::parse_double(row[static_cast<std::size_t>(cols[7])], r + 2, "po_y1_0");
    u.po_y1_1 = csv::parse_double(row[static_cast<std::size_t>(cols[8])], r + 2, "po_y1_1");
    panel.units.push_back(std::move(u));
  }
  double att_sum = 0.0;
  std::size_t n_treated = 0;
  for (const auto& u : panel.units) {
    if (u.w == 1) {
      att_sum += u.po_y1_1 - u.po_y1_0;
      ++n_treated;
    }
  }
  panel.true_att = n_treated > 0 ? att_sum / static_cast<double>(n_treated) : 0.0;
  return panel;
}

}  // namespace bracket
