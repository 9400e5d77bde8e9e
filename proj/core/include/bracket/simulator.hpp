#pragma once

/// Synthetic two-period panels with full potential outcomes.
///
/// Two families are provided:
///   * a parametric autoregressive model with additive unit/time effects, a
///     selection level shift, and a persistence coefficient, for which the
///     population values of all three estimands have closed forms; and
///   * four stylized constructions on a binary lagged outcome, each built so
///     that a chosen subset of the identifying conditions holds exactly while
///     the others fail.
///
/// Every generated unit carries its four potential outcomes, so true effects
/// and exact identification errors are computable alongside the observed
/// panel. Generation draws from counter-based per-unit random streams: the
/// same (spec, n, seed) always yields a bit-identical panel, under any thread
/// count.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bracket/dataset.hpp"

namespace bracket {

/// Parameters of the autoregressive panel model
///   Y_t = alpha + beta * W * 1{t >= 1} + gamma * W + delta_t + rho * Y_{t-1} + eps_t
/// with W ~ Bernoulli(p_treated), Y_{-1} | W ~ Normal(group mean, ylag_sd),
/// alpha ~ Normal(0, alpha_sd), eps_t ~ Normal(0, eps_sd), all independent.
struct ParametricDgpSpec {
  double beta = 2.0;    ///< treatment effect (enters only at t = 1)
  double gamma = -1.0;  ///< selection level shift (enters both periods)
  double rho = 0.5;     ///< persistence of the lagged outcome
  double delta0 = 0.0;  ///< time effect at t = 0
  double delta1 = 0.0;  ///< time effect at t = 1
  double alpha_sd = 1.0;
  double eps_sd = 1.0;
  double ylag_mean_treated = 0.0;
  double ylag_mean_control = 1.0;
  double ylag_sd = 1.0;
  double p_treated = 0.5;

  /// Throws PreconditionError unless all fields are finite, the spreads are
  /// nonnegative, and p_treated lies strictly inside (0, 1).
  void validate() const;
};

/// Population values of the three estimands under a ParametricDgpSpec.
struct ClosedForms {
  double m;     ///< beta + (1 + rho) * gamma
  double didm;  ///< beta + rho * gamma
  double did;   ///< didm + rho * (1 - rho) * (ylag_mean_control - ylag_mean_treated)
};

ClosedForms closed_forms(const ParametricDgpSpec& spec);

/// One simulated unit together with its potential outcomes.
/// po_yT_D is the period-T outcome the unit would realize under treatment
/// status D, holding its own selection terms fixed. Observed outcomes equal
/// the branch selected by the unit's w, bit-exactly.
struct OracleUnit {
  std::string unit_id;
  int w = 0;
  double y_lag = 0.0;
  double po_y0_0 = 0.0;
  double po_y0_1 = 0.0;
  double po_y1_0 = 0.0;
  double po_y1_1 = 0.0;
};

struct OraclePanel {
  std::vector<OracleUnit> units;
  /// Mean of po_y1_1 - po_y1_0 over treated units.
  double true_att = 0.0;

  /// The observable two-period panel: w, y_lag, y0 = po_y0_w, y1 = po_y1_w.
  CanonicalDataset observed() const;
};

/// Generates n units from the parametric model. Requires n >= 2 and a valid
/// spec. Unit ids are zero-padded indices, so lexicographic order equals
/// generation order.
OraclePanel simulate_parametric(const ParametricDgpSpec& spec, std::size_t n, std::uint64_t seed);

/// The four stylized failure patterns. Names state which identifying
/// condition survives and which breaks.
enum class FailurePattern {
  MHoldsDidmFails,    ///< group level shift at t = 0 only
  DidmHoldsMFails,    ///< group level shift common to both periods
  DidmHoldsDidFails,  ///< trend loads on the lag; groups differ in lag law
  DidHoldsDidmFails,  ///< trend loads on lag-x-group; lag laws mirror-balanced
};

/// A failure pattern plus its free parameters: the group level shifts mu(w)
/// (used by the first two patterns) and the binary lagged-outcome law
/// P(Y_lag = +1 | group) per group.
struct CounterexampleKind {
  FailurePattern pattern = FailurePattern::MHoldsDidmFails;
  double mu0 = 0.0;  ///< level shift mu(0) for control units
  double mu1 = -1.0; ///< level shift mu(1) for treated units
  double p_pos_treated = 0.5;  ///< P(Y_lag = +1 | treated)
  double p_pos_control = 0.5;  ///< P(Y_lag = +1 | control)
  double p_treated = 0.5;

  /// The conventional parameterization of each pattern: mu = (0, -1),
  /// balanced lag laws except the third pattern (0.25 treated / 0.75 control).
  static CounterexampleKind defaults(FailurePattern pattern);

  /// Throws PreconditionError if the parameters cannot produce the pattern:
  /// the first two patterns need mu0 != mu1, and DidHoldsDidmFails needs
  /// E[Y_lag | treated] + E[Y_lag | control] = 0.
  void validate() const;
};

/// Generates n units (n >= 100) of the given construction. Lagged outcomes
/// are binary in {-1, +1}; shocks are standard normal.
OraclePanel simulate_counterexample(const CounterexampleKind& kind, std::size_t n,
                                    std::uint64_t seed);

/// Exact identification errors computed from potential outcomes (the never
/// observed counterfactual branch), with lagged outcomes grouped into
/// quantile cells.
struct IdentificationErrors {
  double d_m = 0.0;     ///< matching error: treated-weighted cell gaps of po_y1_0
  double d_didm = 0.0;  ///< within-cell trend gaps of po_y1_0 - po_y0_0
  double d_did = 0.0;   ///< unconditional trend gap
  double d_m_se = 0.0;  ///< large-sample standard errors of the above
  double d_didm_se = 0.0;
  double d_did_se = 0.0;
  std::size_t n_cells_used = 0;
  std::vector<std::string> warnings;  ///< one entry per merged empty/one-group cell
};

/// Requires both groups nonempty and n_bins >= 1. Cells missing either group
/// are merged into a neighbor (with a warning) until every cell is two-sided.
IdentificationErrors identification_errors(const OraclePanel& panel, std::size_t n_bins);

/// Mean-level test of the three identifying conditions on oracle potential
/// outcomes. Within each lagged-outcome cell (exact cells when the lag takes
/// few distinct values, quantile cells otherwise) the group gap must be
/// within tol standard errors of zero:
///   cond_m:    gaps of po_y1_0 and of po_y1_1;
///   cond_didm: gaps of the trend po_y1_0 - po_y0_0;
///   cond_did:  the unconditional trend gap.
struct ConditionCheck {
  bool cond_m = false;
  bool cond_didm = false;
  bool cond_did = false;
  std::size_t n_cells_used = 0;
  std::vector<std::string> warnings;
};

ConditionCheck condition_check(const OraclePanel& panel, double tol);

/// Writes the oracle CSV variant: the observable columns followed by the four
/// potential-outcome columns
///   unit_id,w,y_lag,y0,y1,po_y0_0,po_y0_1,po_y1_0,po_y1_1
void write_panel_csv(const OraclePanel& panel, const std::string& path);

/// Reads a CSV written by write_panel_csv back into an OraclePanel.
OraclePanel read_panel_csv(const std::string& path);

}  // namespace bracket
