#pragma once

/// Adapters from long/staggered panels to the two-period canonical frame.
///
/// A long panel holds one row per (unit, time) with an absorbing adoption
/// period per unit. Each adapter picks one (event-time, horizon) cell and
/// emits a CanonicalDataset on which the core estimators realize a familiar
/// event-study estimand:
///   * LagMatchedM       — switchers vs not-yet-treated units, matched on a
///                         window of outcome lags;
///   * CohortDid         — cohort-vs-comparison difference-in-differences
///                         anchored at the cohort's last pre-period;
///   * LocalProjectionDidm — switcher trends vs control trends conditioned on
///                         a caller-selected set of outcome lags.
/// Units that are neither newly treated nor valid comparisons (for example,
/// units treated earlier) never appear in the output.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bracket/dataset.hpp"

namespace bracket {

struct LongRow {
  std::string unit_id;
  int time = 0;
  double outcome = 0.0;
  std::optional<int> treated_at;  ///< adoption period; nullopt = never treated
};

struct LongPanel {
  std::vector<LongRow> rows;
  bool balanced = false;  ///< every unit observed at the same set of times

  /// Throws InputError on duplicate (unit, time) pairs or a unit whose rows
  /// disagree about treated_at; recomputes the balanced flag.
  void validate_and_finalize();
};

/// Reads columns unit,time,y,treated_at (empty treated_at = never treated).
LongPanel load_long_csv(const std::string& path);
void write_long_csv(const LongPanel& panel, const std::string& path);

enum class CellStyle { LagMatchedM, CohortDid, LocalProjectionDidm };
enum class Comparison { NeverTreated, NotYetTreated };

struct CellSpec {
  CellStyle style = CellStyle::LagMatchedM;
  int event_time = 0;    ///< switching period t (adoption period g for CohortDid)
  int horizon = 0;       ///< post periods ahead: y1 is taken at event_time + horizon
  std::size_t n_lags = 1;  ///< matching window length for LagMatchedM
  Comparison comparison = Comparison::NotYetTreated;

  void validate() const;  ///< horizon >= 0 is enforced by type; n_lags >= 1 checked
};

/// Switchers at event_time vs comparison units, y1 = Y_{t+horizon},
/// y0 = y_lag = Y_{t-1}, covariates = earlier lags Y_{t-2}..Y_{t-n_lags}.
/// Units missing any required period are excluded from the cell (count noted
/// in meta.notes). Throws ComputationError when the cell has no switchers or
/// no comparison units.
CanonicalDataset adapt_lag_matched(const LongPanel& panel, const CellSpec& spec);

/// Cohort g = event_time observed at t = g + horizon, anchored at g - 1:
/// y0 = y_lag = Y_{g-1}, y1 = Y_t, no covariates. NotYetTreated means
/// treated_at >= t + 1. estimate_did on the result is the cohort
/// difference-in-differences for the (g, t) cell.
CanonicalDataset adapt_cohort_did(const LongPanel& panel, const CellSpec& spec);

/// Switchers at event_time vs comparison units with y1 = Y_{t+horizon} and
/// y0 = Y_{t-1}; the conditioning set is chosen by x_lags (lag index ell
/// selects Y_{t-ell}, ell >= 1): the first selected lag becomes y_lag and the
/// rest become covariates. Empty x_lags keeps y_lag = Y_{t-1} so plain DID on
/// the cell needs no conditioning.
CanonicalDataset adapt_local_projection(const LongPanel& panel, const CellSpec& spec,
                                        const std::vector<int>& x_lags);

}  // namespace bracket
