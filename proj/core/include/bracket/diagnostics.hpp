#pragma once

/// Empirical checks of the assumptions behind the estimand bracketing:
///   (i)   negative selection — controls sit weakly above treated units in
///         the pre-period outcome, conditionally on the lagged outcome;
///   (ii)  the control lagged-outcome distribution first-order stochastically
///         dominates the treated one;
///   (iii) the control conditional trend is weakly decreasing in the lagged
///         outcome.
/// Each check emits fitted curves or CDFs plus a three-way verdict. Verdicts
/// are deliberately conservative: a violation counts only when it exceeds the
/// local sampling-uncertainty scale (pointwise band width for curves, a DKW
/// envelope for CDFs, a bootstrap spread for the multivariate variants);
/// anything smaller is Ambiguous.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bracket/dataset.hpp"

namespace bracket {

enum class Verdict { Supported, Ambiguous, Violated };

/// Label for generic conditional-gap checks: Supported / Ambiguous / Violated.
std::string verdict_label(Verdict v);
/// Label for dominance checks: DominanceSupported / Ambiguous / Violated.
std::string dominance_verdict_label(Verdict v);
/// Label for monotonicity checks: DecreasingSupported / Ambiguous / Violated.
std::string monotonicity_verdict_label(Verdict v);

/// Configuration for piecewise-polynomial conditional-mean fits.
struct SeriesConfig {
  std::size_t n_bins = 0;  ///< 0 = auto: ceil(n^0.2), floored at 2
  std::size_t degree = 1;  ///< polynomial degree within each cell
};

/// A fitted conditional-mean curve on an evaluation grid with plain pointwise
/// 95% least-squares bands (no bias correction, so the bands are centered on
/// the fit; band_lo <= fitted <= band_hi always holds here).
struct CurveFit {
  std::vector<double> grid;    ///< strictly increasing evaluation points
  std::vector<double> fitted;
  std::vector<double> band_lo;
  std::vector<double> band_hi;
  std::vector<double> cell_breaks;  ///< interior partition boundaries used
  std::size_t n_bins = 0;           ///< cells actually used (after reduction)
  std::size_t degree = 1;
  std::vector<std::string> warnings;
};

/// Piecewise least-squares polynomial fit of ys on xs over quantile-spaced
/// cells, evaluated on 101 equally spaced points spanning the xs range.
/// Cells too small for the requested degree reduce the cell count with a
/// warning; all-equal xs raise DegenerateSampleError.
CurveFit series_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                    const SeriesConfig& cfg);

/// Same fit evaluated on a caller-specified strictly increasing grid.
CurveFit series_fit_on_grid(const std::vector<double>& xs, const std::vector<double>& ys,
                            const SeriesConfig& cfg, const std::vector<double>& grid);

/// Check (i): fits of y0 on y_lag within each group, evaluated on the common
/// support of the two groups.
struct SelectionReport {
  CurveFit control_fit;
  CurveFit treated_fit;
  Verdict verdict = Verdict::Ambiguous;
  /// Largest treated-minus-control fitted gap (positive = violation).
  double max_gap = 0.0;
};

SelectionReport check_negative_selection(const CanonicalDataset& ds, const SeriesConfig& cfg);

/// Check (ii): group ECDFs of y_lag on the pooled sorted unique grid.
/// Dominance means cdf_control <= cdf_treated everywhere.
struct FosdReport {
  std::vector<double> grid;
  std::vector<double> cdf_control;
  std::vector<double> cdf_treated;
  double max_violation = 0.0;     ///< largest positive cdf_control - cdf_treated
  double dkw_epsilon_sum = 0.0;   ///< sum of the two one-sample DKW envelopes
  Verdict verdict = Verdict::Ambiguous;
};

FosdReport check_fosd(const CanonicalDataset& ds, double alpha);

/// Check (iii): fit of the control trend y1 - y0 on y_lag; weakly decreasing
/// means no fitted increase between consecutive grid points.
struct MonotonicityReport {
  CurveFit curve;
  double max_increase = 0.0;        ///< largest fitted[j+1] - fitted[j]
  double band_width_at_max = 0.0;   ///< wider of the two bands at the argmax pair
  double slope = 0.0;               ///< global least-squares slope of the trend
  Verdict verdict = Verdict::Ambiguous;
};

MonotonicityReport check_phi_monotone(const CanonicalDataset& ds, const SeriesConfig& cfg);

/// Multivariate analogue on x = (y_lag, covariates). With no covariates the
/// scalar checks above are applied and their verdicts carried over verbatim.
struct Assumption2Config {
  SeriesConfig series;       ///< used by the no-covariate (scalar) path
  std::size_t n_boot = 200;  ///< bootstrap replicates for the epsilon scale
  double bandwidth = 0.0;    ///< kernel bandwidth on standardized x; 0 = n^(-1/(d+4))
  std::size_t max_points = 400;  ///< evaluation-point cap (stride subsample)
  std::uint64_t seed = 0;
};

struct Assumption2Report {
  Verdict selection = Verdict::Ambiguous;     ///< (i) at treated points
  Verdict dominance = Verdict::Ambiguous;     ///< (ii) at sample points
  Verdict monotonicity = Verdict::Ambiguous;  ///< (iii) on ordered point pairs
  /// Clamped-at-zero violation statistics and their bootstrap epsilon scales
  /// (for the scalar path these carry the scalar thresholds instead).
  double selection_violation = 0.0;
  double selection_epsilon = 0.0;
  double dominance_violation = 0.0;
  double dominance_epsilon = 0.0;
  double monotonicity_violation = 0.0;
  double monotonicity_epsilon = 0.0;
  std::size_t n_points_used = 0;
  std::vector<std::string> warnings;
};

Assumption2Report check_assumption2(const CanonicalDataset& ds, double alpha,
                                    const Assumption2Config& cfg);

/// Share of points in `eval_x` where the control empirical multivariate CDF
/// exceeds the treated one, reported as the largest excess (>= 0). Exposed for
/// direct comparison against brute-force double loops in tests.
double multivariate_dominance_violation(const std::vector<double>& control_x,
                                        const std::vector<double>& treated_x,
                                        std::size_t arity,
                                        const std::vector<double>& eval_x);

/// CSV exports (columns documented in each writer).
void write_curve_csv(const CurveFit& curve, const std::string& path);
void write_selection_csv(const SelectionReport& report, const std::string& path);
void write_fosd_csv(const FosdReport& report, const std::string& path);

/// Static SVG line plots of the same objects.
void write_selection_svg(const SelectionReport& report, const std::string& path);
void write_fosd_svg(const FosdReport& report, const std::string& path);
void write_monotonicity_svg(const MonotonicityReport& report, const std::string& path);

}  // namespace bracket
