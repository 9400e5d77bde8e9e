#include "bracket/event_adapter.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "bracket/csv.hpp"
#include "bracket/errors.hpp"

namespace bracket {

namespace {

struct UnitSeries {
  std::string unit_id;
  std::optional<int> treated_at;
  std::map<int, double> outcomes;
};

/// Units keyed and ordered by unit_id, so adapter output is independent of
/// input row order.
std::vector<UnitSeries> collect_units(const LongPanel& panel) {
  std::map<std::string, UnitSeries> units;
  for (const auto& row : panel.rows) {
    auto [it, inserted] = units.try_emplace(row.unit_id);
    UnitSeries& u = it->second;
    if (inserted) {
      u.unit_id = row.unit_id;
      u.treated_at = row.treated_at;
    } else if (u.treated_at != row.treated_at) {
      throw InputError("unit '" + row.unit_id + "' has inconsistent treated_at values");
    }
    if (!u.outcomes.emplace(row.time, row.outcome).second) {
      throw InputError("duplicate observation for unit '" + row.unit_id + "' at time " +
                       std::to_string(row.time));
    }
  }
  std::vector<UnitSeries> out;
  out.reserve(units.size());
  for (auto& [id, u] : units) out.push_back(std::move(u));
  return out;
}

std::string cell_name(const CellSpec& spec) {
  return "(t=" + std::to_string(spec.event_time) +
         ", horizon=" + std::to_string(spec.horizon) + ")";
}

bool is_comparison_unit(const UnitSeries& u, int untreated_through, Comparison comparison) {
  if (!u.treated_at.has_value()) return true;
  if (comparison == Comparison::NeverTreated) return false;
  return *u.treated_at > untreated_through;
}

/// Shared core: classify units around a switching period, read the required
/// outcome columns, and assemble the canonical records. `x_times` lists the
/// matching-variable periods: the first becomes y_lag, the rest covariates.
/// NotYetTreated comparison units must stay untreated through
/// `untreated_through` (exclusive adoption bound): the switching period for
/// switcher designs, the observation period for the cohort design.
CanonicalDataset assemble_cell(const std::vector<UnitSeries>& units, const CellSpec& spec,
                               int switch_period, int untreated_through, int y0_time,
                               int y1_time, const std::vector<int>& x_times,
                               const std::vector<std::string>& x_names) {
  CanonicalDataset ds;
  ds.meta.covariate_names = x_names;
  std::size_t n_missing_excluded = 0;

  for (const auto& u : units) {
    int w;
    if (u.treated_at.has_value() && *u.treated_at == switch_period) {
      w = 1;
    } else if (is_comparison_unit(u, untreated_through, spec.comparison)) {
      w = 0;
    } else {
      continue;  // treated earlier or inside the comparison window: not usable
    }

    UnitRecord rec;
    rec.unit_id = u.unit_id;
    rec.w = w;
    bool complete = true;
    auto fetch = [&](int time, double* dst) {
      const auto it = u.outcomes.find(time);
      if (it == u.outcomes.end()) {
        complete = false;
        return;
      }
      *dst = it->second;
    };
    fetch(y0_time, &rec.y0);
    fetch(y1_time, &rec.y1);
    double first_x = 0.0;
    fetch(x_times.front(), &first_x);
    rec.y_lag = first_x;
    rec.covariates.resize(x_times.size() - 1);
    for (std::size_t i = 1; i < x_times.size(); ++i) {
      fetch(x_times[i], &rec.covariates[i - 1]);
    }
    if (!complete) {
      ++n_missing_excluded;
      continue;
    }
    ds.records.push_back(std::move(rec));
  }

  if (n_missing_excluded > 0) {
    ds.meta.notes.push_back("cell " + cell_name(spec) + ": excluded " +
                            std::to_string(n_missing_excluded) +
                            " units with missing required periods");
  }
  if (ds.n_treated() == 0) {
    throw ComputationError("cell " + cell_name(spec) + ": no units switch at t=" +
                           std::to_string(switch_period));
  }
  if (ds.n_control() == 0) {
    throw ComputationError("cell " + cell_name(spec) + ": comparison set is empty");
  }
  return ds;
}

}  // namespace

void LongPanel::validate_and_finalize() {
  const std::vector<UnitSeries> units = collect_units(*this);  // throws on defects
  balanced = true;
  for (std::size_t i = 1; i < units.size(); ++i) {
    if (units[i].outcomes.size() != units[0].outcomes.size() ||
        !std::equal(units[i].outcomes.begin(), units[i].outcomes.end(),
                    units[0].outcomes.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      balanced = false;
      break;
    }
  }
}

LongPanel load_long_csv(const std::string& path) {
  const csv::Table table = csv::read_table(path);
  const int c_unit = table.column("unit");
  const int c_time = table.column("time");
  const int c_y = table.column("y");
  const int c_treated = table.column("treated_at");
  for (const auto& [col, name] :
       {std::pair{c_unit, "unit"}, {c_time, "time"}, {c_y, "y"}, {c_treated, "treated_at"}}) {
    if (col < 0) throw SchemaError(path + ": missing required column '" + name + "'");
  }

  LongPanel panel;
  panel.rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    LongRow lr;
    lr.unit_id = row[static_cast<std::size_t>(c_unit)];
    lr.time = static_cast<int>(
        csv::parse_int(row[static_cast<std::size_t>(c_time)], r + 2, "time"));
    lr.outcome = csv::parse_double(row[static_cast<std::size_t>(c_y)], r + 2, "y");
    const std::string& treated = row[static_cast<std::size_t>(c_treated)];
    if (!treated.empty()) {
      lr.treated_at = static_cast<int>(csv::parse_int(treated, r + 2, "treated_at"));
    }
    panel.rows.push_back(std::move(lr));
  }
  panel.validate_and_finalize();
  return panel;
}

void write_long_csv(const LongPanel& panel, const std::string& path) {
  csv::Table table;
  table.header = {"unit", "time", "y", "treated_at"};
  table.rows.reserve(panel.rows.size());
  for (const auto& row : panel.rows) {
    table.rows.push_back({row.unit_id, std::to_string(row.time),
                          csv::format_double(row.outcome),
                          row.treated_at ? std::to_string(*row.treated_at) : ""});
  }
  csv::write_table(path, table);
}

void CellSpec::validate() const {
  if (horizon < 0) throw PreconditionError("cell horizon must be >= 0");
  if (n_lags < 1) throw PreconditionError("matching window needs n_lags >= 1");
}

CanonicalDataset adapt_lag_matched(const LongPanel& panel, const CellSpec& spec) {
  spec.validate();
  const std::vector<UnitSeries> units = collect_units(panel);
  const int t = spec.event_time;
  std::vector<int> x_times;
  std::vector<std::string> x_names;
  for (std::size_t ell = 1; ell <= spec.n_lags; ++ell) {
    x_times.push_back(t - static_cast<int>(ell));
    if (ell >= 2) x_names.push_back("lag" + std::to_string(ell));
  }
  CanonicalDataset ds =
      assemble_cell(units, spec, t, t, t - 1, t + spec.horizon, x_times, x_names);
  ds.meta.notes.push_back("lag-matched cell " + cell_name(spec) + " with " +
                          std::to_string(spec.n_lags) + " matching lag(s)");
  return ds;
}

CanonicalDataset adapt_cohort_did(const LongPanel& panel, const CellSpec& spec) {
  spec.validate();
  const std::vector<UnitSeries> units = collect_units(panel);
  const int g = spec.event_time;
  const int t = g + spec.horizon;
  try {
    CanonicalDataset ds = assemble_cell(units, spec, g, t, g - 1, t, {g - 1}, {});
    ds.meta.notes.push_back("cohort cell (g=" + std::to_string(g) +
                            ", t=" + std::to_string(t) + ")");
    return ds;
  } catch (const ComputationError&) {
    throw ComputationError("cohort cell (g=" + std::to_string(g) +
                           ", t=" + std::to_string(t) +
                           "): no usable treated cohort or comparison units");
  }
}

CanonicalDataset adapt_local_projection(const LongPanel& panel, const CellSpec& spec,
                                        const std::vector<int>& x_lags) {
  spec.validate();
  for (const int ell : x_lags) {
    if (ell < 1) {
      throw PreconditionError("conditioning lags must be >= 1 (periods before t)");
    }
  }
  const std::vector<UnitSeries> units = collect_units(panel);
  const int t = spec.event_time;

  std::vector<int> x_times;
  std::vector<std::string> x_names;
  if (x_lags.empty()) {
    x_times.push_back(t - 1);
  } else {
    for (std::size_t i = 0; i < x_lags.size(); ++i) {
      x_times.push_back(t - x_lags[i]);
      if (i >= 1) x_names.push_back("lag" + std::to_string(x_lags[i]));
    }
  }
  CanonicalDataset ds =
      assemble_cell(units, spec, t, t, t - 1, t + spec.horizon, x_times, x_names);
  ds.meta.notes.push_back("local-projection cell " + cell_name(spec));
  return ds;
}

}  // namespace bracket
