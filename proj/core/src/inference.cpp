#include "bracket/inference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bracket/errors.hpp"
#include "bracket/parallel.hpp"
#include "bracket/rng.hpp"

namespace bracket {

namespace {

struct ReplicateRow {
  double m = 0.0, didm = 0.0, did = 0.0;
  bool ok = false;
};

Interval percentile_interval(std::vector<double> draws, double alpha) {
  Interval ci;
  ci.lo = sample_quantile(draws, alpha / 2.0);
  ci.hi = sample_quantile(std::move(draws), 1.0 - alpha / 2.0);
  return ci;
}

}  // namespace

double dkw_epsilon(std::size_t n, double alpha) {
  if (n < 1) throw PreconditionError("dkw_epsilon requires n >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw PreconditionError("dkw_epsilon requires alpha in (0, 1)");
  }
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw PreconditionError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BracketCis bootstrap_brackets(const CanonicalDataset& ds, const MethodSpec& method,
                              std::size_t B, double alpha, std::uint64_t seed) {
  if (B < 100) throw PreconditionError("bootstrap requires B >= 100 replicates");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw PreconditionError("bootstrap requires alpha in (0, 1)");
  }

  // Group index lists in record order; resampled index draws are sorted so
  // the rebuilt dataset stays in unit_id order whenever the input was.
  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    (ds.records[i].w == 1 ? treated : control).push_back(i);
  }
  if (treated.empty() || control.empty()) {
    throw PreconditionError("bootstrap requires both treatment groups nonempty");
  }

  BracketCis out;
  out.point = estimate_all(ds, method);
  out.alpha = alpha;
  out.seed = seed;

  std::vector<ReplicateRow> rows(B);
  parallel_for(B, [&](std::size_t r) {
    rng::Stream stream(seed, static_cast<std::uint64_t>(r));
    std::vector<std::size_t> picks;
    picks.reserve(ds.records.size());
    for (std::size_t i = 0; i < control.size(); ++i) {
      picks.push_back(control[stream.next_below(control.size())]);
    }
    for (std::size_t i = 0; i < treated.size(); ++i) {
      picks.push_back(treated[stream.next_below(treated.size())]);
    }
    std::sort(picks.begin(), picks.end());

    CanonicalDataset resample;
    resample.meta = ds.meta;
    resample.records.reserve(picks.size());
    for (const std::size_t i : picks) resample.records.push_back(ds.records[i]);

    try {
      const BracketReport rep = estimate_all(resample, method);
      rows[r].m = rep.m.value;
      rows[r].didm = rep.didm.value;
      rows[r].did = rep.did.value;
      rows[r].ok = true;
    } catch (const ComputationError&) {
      rows[r].ok = false;
    } catch (const PreconditionError&) {
      rows[r].ok = false;
    }
  });

  std::vector<double> m_draws, didm_draws, did_draws, gap1_draws, gap2_draws;
  m_draws.reserve(B);
  didm_draws.reserve(B);
  did_draws.reserve(B);
  gap1_draws.reserve(B);
  gap2_draws.reserve(B);
  for (const auto& row : rows) {
    if (!row.ok) {
      ++out.n_degenerate;
      continue;
    }
    m_draws.push_back(row.m);
    didm_draws.push_back(row.didm);
    did_draws.push_back(row.did);
    gap1_draws.push_back(row.didm - row.m);
    gap2_draws.push_back(row.did - row.didm);
  }
  out.n_replicates = m_draws.size();
  if (out.n_degenerate * 10 > B) {
    throw ComputationError(
        "bootstrap unreliable: " + std::to_string(out.n_degenerate) + " of " +
        std::to_string(B) + " replicates were degenerate (more than 10%)");
  }

  out.ci_m = percentile_interval(std::move(m_draws), alpha);
  out.ci_didm = percentile_interval(std::move(didm_draws), alpha);
  out.ci_did = percentile_interval(std::move(did_draws), alpha);
  out.ci_gap_didm_m = percentile_interval(std::move(gap1_draws), alpha);
  out.ci_gap_did_didm = percentile_interval(std::move(gap2_draws), alpha);
  return out;
}

}  // namespace bracket
