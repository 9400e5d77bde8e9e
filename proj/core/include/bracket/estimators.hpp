#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bracket/dataset.hpp"

namespace bracket {

/**
 * Counterfactual prediction engines.
 *
 * MeanDifference               : global control mean regardless of the target.
 * NearestNeighbor              : mean response of the k nearest controls under
 *                                Euclidean distance (absolute difference for
 *                                scalar x); ties at the k-th distance are all
 *                                included and averaged, which makes the
 *                                prediction permutation invariant.
 * LocalLinear                  : weighted least-squares line at the target
 *                                with Gaussian kernel weights
 *                                exp(-(d/bandwidth)^2 / 2).
 * LocalLinearRegressionAdjusted: LocalLinear run on outcomes that were first
 *                                adjusted by a linear regression on the
 *                                covariates fitted within the control group
 *                                (the engine itself is identical to
 *                                LocalLinear; estimate_* performs the
 *                                adjustment and matches on raw y_lag).
 */
enum class MethodKind { MeanDifference, NearestNeighbor, LocalLinear, LocalLinearRegressionAdjusted };

struct MethodSpec {
  MethodKind kind = MethodKind::NearestNeighbor;
  int k = 1;                 // NearestNeighbor only
  double bandwidth = 1.0;    // LocalLinear* only, in raw y_lag units for scalar
                             // matching; in control-sd units when covariates
                             // extend the matching vector (standardized coords)
  bool enforce_support = false;

  /// Throws PreconditionError on invalid k/bandwidth for the chosen kind.
  void validate() const;
  /// Short human-readable tag, e.g. "nn(k=10)" or "loclin(bw=1)".
  std::string label() const;
};

/// The nine reference variants: mean difference; NN k=1/k=10 each without and
/// with support enforcement; local linear bw=1.0/4.0; regression-adjusted
/// local linear bw=1.0/4.0.
std::vector<MethodSpec> standard_method_suite();

enum class Estimand { M, DIDM, DID };

struct AttEstimate {
  Estimand estimand = Estimand::M;
  double value = 0.0;
  std::size_t n_treated_used = 0;
  MethodSpec method;
};

struct BracketReport {
  AttEstimate m;
  AttEstimate didm;
  AttEstimate did;
  double gap_didm_m = 0.0;   // didm.value - m.value
  double gap_did_didm = 0.0; // did.value - didm.value
  bool ordering_holds = false;  // both gaps >= 0 (strict rule, tol_order = 0)
  bool support_applied = false;
  SupportTrimReport support;
};

/**
 * Shared counterfactual regression engine.
 *
 * control_x is a flattened row-major matrix (n_controls x arity); target_x
 * likewise. Responses y run parallel to control rows. Predictions are
 * returned per target, with targets that hit the local-linear singular-design
 * fallback (locally weighted mean) listed in degenerate_targets.
 *
 * Determinism: per-target predictions may be computed in parallel, but every
 * within-target sum runs over controls in their given order, so results are
 * bit-identical to sequential evaluation. Callers pass controls sorted by
 * unit_id.
 *
 * Errors: PreconditionError when controls are empty, arities differ, or
 * k > n_controls; DegenerateSampleError naming the target when every kernel
 * weight underflows to zero at some target.
 */
struct FitResult {
  std::vector<double> predictions;
  std::vector<std::size_t> degenerate_targets;
};

FitResult counterfactual_fit(const std::vector<double>& control_x,
                             std::size_t arity,
                             const std::vector<double>& control_y,
                             const std::vector<double>& target_x,
                             const MethodSpec& method);

/// Scalar convenience overload (arity 1).
FitResult counterfactual_fit(const std::vector<double>& control_x,
                             const std::vector<double>& control_y,
                             const std::vector<double>& target_x,
                             const MethodSpec& method);

/**
 * theta_DID: mean(y1 - y0 | w=1) - mean(y1 - y0 | w=0). The matching engine is
 * irrelevant by construction; method is echoed in the result as
 * MeanDifference. enforce_support still trims treated units first, and the
 * LocalLinearRegressionAdjusted kind still applies its covariate adjustment,
 * so estimate_all reports all three estimands on identical samples.
 */
AttEstimate estimate_did(const CanonicalDataset& ds, const MethodSpec& method = {});

/**
 * theta_M: treated mean of y1 minus the matched control counterfactual of y1.
 * The matching vector is y_lag alone when covariate arity is 0; otherwise
 * (y_lag, covariates), each coordinate standardized by its control-sample
 * standard deviation (zero-sd coordinates are left unscaled). The outer mean
 * over treated units is the unweighted sample average.
 */
AttEstimate estimate_m(const CanonicalDataset& ds, const MethodSpec& method);

/// theta_DIDM: identical pipeline with response y1 - y0.
AttEstimate estimate_didm(const CanonicalDataset& ds, const MethodSpec& method);

/// All three estimands on one sample (support trim and covariate adjustment
/// computed once), with bracketing gaps and the strict ordering verdict.
BracketReport estimate_all(const CanonicalDataset& ds, const MethodSpec& method);

}  // namespace bracket
