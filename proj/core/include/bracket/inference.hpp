#pragma once

/// Bootstrap confidence intervals for the three estimands and the two
/// ordering gaps, plus the one-sample DKW envelope used by the dominance
/// diagnostic.

#include <cstddef>
#include <cstdint>

#include "bracket/estimators.hpp"

namespace bracket {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct BracketCis {
  BracketReport point;  ///< full-sample estimates
  Interval ci_m;
  Interval ci_didm;
  Interval ci_did;
  Interval ci_gap_didm_m;
  Interval ci_gap_did_didm;
  std::size_t n_replicates = 0;  ///< successful replicates entering the quantiles
  std::size_t n_degenerate = 0;  ///< replicates dropped (e.g. empty post-trim support)
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

/// Pairs bootstrap stratified by treatment group (group sizes preserved),
/// percentile intervals at alpha/2 and 1-alpha/2. Requires B >= 100 and both
/// groups nonempty. Replicates failing estimation (degenerate resamples) are
/// dropped and counted; more than 10% dropped raises a ComputationError.
/// Replicate r draws from its own counter-based stream (seed, r), so results
/// are bit-identical for a given (inputs, B, seed) at any thread count.
BracketCis bootstrap_brackets(const CanonicalDataset& ds, const MethodSpec& method,
                              std::size_t B, double alpha, std::uint64_t seed);

/// One-sample Dvoretzky-Kiefer-Wolfowitz envelope: sqrt(ln(2/alpha) / (2n)).
/// Requires n >= 1 and alpha in (0, 1).
double dkw_epsilon(std::size_t n, double alpha);

/// Type-7 (linear interpolation) empirical quantile of an unsorted sample.
/// Requires a nonempty sample and p in [0, 1]. Exposed for reuse by
/// diagnostics and tests.
double sample_quantile(std::vector<double> values, double p);

}  // namespace bracket
