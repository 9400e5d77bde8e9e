#include "bracket/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

#include "bracket/csv.hpp"
#include "bracket/errors.hpp"
#include "bracket/parallel.hpp"

namespace bracket {

namespace {

constexpr double kSingularRelTol = 1e-12;

/// Indices of one treatment group, ordered by unit_id (lexicographic). When
/// records are already in unit_id order the sort is skipped; duplicated ids
/// (bootstrap resamples) are identical records, so any stable order yields
/// identical sums.
std::vector<std::size_t> group_indices(const CanonicalDataset& ds, int w) {
  std::vector<std::size_t> idx;
  idx.reserve(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (ds.records[i].w == w) idx.push_back(i);
  }
  const bool sorted = std::is_sorted(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return ds.records[a].unit_id < ds.records[b].unit_id;
  });
  if (!sorted) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return ds.records[a].unit_id < ds.records[b].unit_id;
    });
  }
  return idx;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Squared Euclidean distance between row i of a and row j of b (row-major).
inline double sq_distance(const double* a, const double* b, std::size_t arity) {
  double s = 0.0;
  for (std::size_t c = 0; c < arity; ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

void nn_predict(const std::vector<double>& control_x, std::size_t arity,
                const std::vector<double>& control_y, const std::vector<double>& target_x,
                int k, std::vector<double>& out) {
  const std::size_t n_c = control_y.size();
  const std::size_t n_t = out.size();
  parallel_for(n_t, [&](std::size_t t) {
    const double* tx = &target_x[t * arity];
    thread_local std::vector<double> dist;
    dist.resize(n_c);
    for (std::size_t j = 0; j < n_c; ++j) {
      dist[j] = sq_distance(&control_x[j * arity], tx, arity);
    }
    // k-th smallest distance; all controls at exactly that distance count.
    thread_local std::vector<double> scratch;
    scratch = dist;
    std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
    const double kth = scratch[static_cast<std::size_t>(k - 1)];
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n_c; ++j) {
      if (dist[j] <= kth) {
        sum += control_y[j];
        ++count;
      }
    }
    out[t] = sum / static_cast<double>(count);
  });
}

void loclin_predict(const std::vector<double>& control_x, std::size_t arity,
                    const std::vector<double>& control_y, const std::vector<double>& target_x,
                    double bandwidth, std::vector<double>& out,
                    std::vector<std::size_t>& degenerate) {
  const std::size_t n_c = control_y.size();
  const std::size_t n_t = out.size();
  const double inv_bw2 = 1.0 / (bandwidth * bandwidth);
  std::vector<unsigned char> fell_back(n_t, 0);
  std::vector<unsigned char> no_mass(n_t, 0);

  parallel_for(n_t, [&](std::size_t t) {
    const double* tx = &target_x[t * arity];
    const std::size_t p = arity + 1;  // intercept + centered coordinates
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                                static_cast<Eigen::Index>(p));
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    Eigen::VectorXd z(static_cast<Eigen::Index>(p));
    double total_weight = 0.0;
    for (std::size_t j = 0; j < n_c; ++j) {
      const double* cx = &control_x[j * arity];
      const double w = std::exp(-0.5 * sq_distance(cx, tx, arity) * inv_bw2);
      if (w == 0.0) continue;
      total_weight += w;
      z(0) = 1.0;
      for (std::size_t c = 0; c < arity; ++c) {
        z(static_cast<Eigen::Index>(c + 1)) = cx[c] - tx[c];
      }
      ata.noalias() += w * z * z.transpose();
      atb.noalias() += (w * control_y[j]) * z;
    }
    if (total_weight == 0.0) {
      no_mass[t] = 1;
      out[t] = 0.0;
      return;
    }
    // Rank check on the weighted normal matrix: fall back to the locally
    // weighted mean when the centered design carries no usable variation.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ata);
    lu.setThreshold(kSingularRelTol);
    if (lu.rank() < static_cast<Eigen::Index>(p)) {
      fell_back[t] = 1;
      out[t] = atb(0) / ata(0, 0);
      return;
    }
    const Eigen::VectorXd coef = lu.solve(atb);
    out[t] = coef(0);
  });

  for (std::size_t t = 0; t < n_t; ++t) {
    if (no_mass[t]) {
      throw DegenerateSampleError(
          "all kernel weights underflowed to zero at target index " + std::to_string(t) +
          "; bandwidth too small for the data scale");
    }
    if (fell_back[t]) degenerate.push_back(t);
  }
}

struct PreparedSample {
  CanonicalDataset data;          // post-trim, post-adjustment sample
  bool support_applied = false;
  SupportTrimReport trim;
  std::vector<std::size_t> treated;  // index into data.records, unit_id order
  std::vector<std::size_t> control;
  std::vector<double> control_x;     // flattened matching coordinates
  std::vector<double> treated_x;
  std::size_t arity = 1;
  MethodSpec engine;                 // method with LLRA lowered to LocalLinear
};

/// Linear adjustment used by LocalLinearRegressionAdjusted: coefficients for
/// each outcome are fitted on controls only, then subtracted from every
/// record. Fitting on controls keeps injected treated-only effects intact.
void adjust_outcomes_on_covariates(CanonicalDataset& ds,
                                   const std::vector<std::size_t>& control) {
  const std::size_t p = ds.covariate_arity();
  const std::size_t n_c = control.size();
  if (n_c < p + 1) {
    throw PreconditionError(
        "regression adjustment needs more control units than covariates");
  }
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n_c), static_cast<Eigen::Index>(p + 1));
  Eigen::VectorXd y0(static_cast<Eigen::Index>(n_c));
  Eigen::VectorXd y1(static_cast<Eigen::Index>(n_c));
  for (std::size_t i = 0; i < n_c; ++i) {
    const auto& rec = ds.records[control[i]];
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t c = 0; c < p; ++c) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) = rec.covariates[c];
    }
    y0(static_cast<Eigen::Index>(i)) = rec.y0;
    y1(static_cast<Eigen::Index>(i)) = rec.y1;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p + 1)) {
    throw SingularityError("regression adjustment design is rank deficient");
  }
  const Eigen::VectorXd b0 = qr.solve(y0);
  const Eigen::VectorXd b1 = qr.solve(y1);
  for (auto& rec : ds.records) {
    double fit0 = b0(0), fit1 = b1(0);
    for (std::size_t c = 0; c < p; ++c) {
      fit0 += b0(static_cast<Eigen::Index>(c + 1)) * rec.covariates[c];
      fit1 += b1(static_cast<Eigen::Index>(c + 1)) * rec.covariates[c];
    }
    rec.y0 -= fit0;
    rec.y1 -= fit1;
  }
}

PreparedSample prepare_sample(const CanonicalDataset& ds, const MethodSpec& method) {
  method.validate();

  PreparedSample s;
  s.engine = method;
  if (method.enforce_support) {
    auto [trimmed, report] = common_support(ds);
    s.data = std::move(trimmed);
    s.trim = report;
    s.support_applied = true;
  } else {
    s.data = ds;
  }

  s.treated = group_indices(s.data, 1);
  s.control = group_indices(s.data, 0);
  if (s.treated.empty() || s.control.empty()) {
    throw PreconditionError("estimation requires at least one treated and one control unit");
  }

  const std::size_t cov_arity = s.data.covariate_arity();
  bool consume_covariates = cov_arity > 0;
  if (method.kind == MethodKind::LocalLinearRegressionAdjusted) {
    s.engine.kind = MethodKind::LocalLinear;
    if (cov_arity > 0) {
      adjust_outcomes_on_covariates(s.data, s.control);
      consume_covariates = false;  // absorbed into the outcome adjustment
    }
  }

  if (!consume_covariates) {
    s.arity = 1;
    s.control_x.reserve(s.control.size());
    for (const std::size_t i : s.control) s.control_x.push_back(s.data.records[i].y_lag);
    s.treated_x.reserve(s.treated.size());
    for (const std::size_t i : s.treated) s.treated_x.push_back(s.data.records[i].y_lag);
    return s;
  }

  // Multivariate matching: (y_lag, covariates), standardized coordinatewise
  // by the control-sample standard deviation. Zero-sd coordinates stay raw.
  s.arity = 1 + cov_arity;
  auto coord = [&](const UnitRecord& r, std::size_t c) {
    return c == 0 ? r.y_lag : r.covariates[c - 1];
  };
  std::vector<double> scale(s.arity, 1.0);
  const double n_c = static_cast<double>(s.control.size());
  for (std::size_t c = 0; c < s.arity; ++c) {
    double mean = 0.0;
    for (const std::size_t i : s.control) mean += coord(s.data.records[i], c);
    mean /= n_c;
    double ss = 0.0;
    for (const std::size_t i : s.control) {
      const double d = coord(s.data.records[i], c) - mean;
      ss += d * d;
    }
    const double sd = n_c > 1 ? std::sqrt(ss / (n_c - 1)) : 0.0;
    scale[c] = sd > 0.0 ? 1.0 / sd : 1.0;
  }
  s.control_x.resize(s.control.size() * s.arity);
  for (std::size_t i = 0; i < s.control.size(); ++i) {
    for (std::size_t c = 0; c < s.arity; ++c) {
      s.control_x[i * s.arity + c] = coord(s.data.records[s.control[i]], c) * scale[c];
    }
  }
  s.treated_x.resize(s.treated.size() * s.arity);
  for (std::size_t i = 0; i < s.treated.size(); ++i) {
    for (std::size_t c = 0; c < s.arity; ++c) {
      s.treated_x[i * s.arity + c] = coord(s.data.records[s.treated[i]], c) * scale[c];
    }
  }
  return s;
}

enum class Response { Y1, Trend };

double response_of(const UnitRecord& r, Response resp) {
  return resp == Response::Y1 ? r.y1 : r.y1 - r.y0;
}

/// Core of estimate_m / estimate_didm on a prepared sample.
double matched_estimate(const PreparedSample& s, Response resp) {
  std::vector<double> treated_resp;
  treated_resp.reserve(s.treated.size());
  for (const std::size_t i : s.treated) treated_resp.push_back(response_of(s.data.records[i], resp));

  if (s.engine.kind == MethodKind::MeanDifference) {
    // Exact group-mean difference; the per-target pipeline would only add
    // rounding noise around the same value.
    std::vector<double> control_resp;
    control_resp.reserve(s.control.size());
    for (const std::size_t i : s.control) control_resp.push_back(response_of(s.data.records[i], resp));
    return mean_of(treated_resp) - mean_of(control_resp);
  }

  std::vector<double> control_resp;
  control_resp.reserve(s.control.size());
  for (const std::size_t i : s.control) control_resp.push_back(response_of(s.data.records[i], resp));

  const FitResult fit =
      counterfactual_fit(s.control_x, s.arity, control_resp, s.treated_x, s.engine);
  double sum = 0.0;
  for (std::size_t t = 0; t < treated_resp.size(); ++t) {
    sum += treated_resp[t] - fit.predictions[t];
  }
  return sum / static_cast<double>(treated_resp.size());
}

double did_on_sample(const PreparedSample& s) {
  double treated_sum = 0.0, control_sum = 0.0;
  for (const std::size_t i : s.treated) {
    treated_sum += s.data.records[i].y1 - s.data.records[i].y0;
  }
  for (const std::size_t i : s.control) {
    control_sum += s.data.records[i].y1 - s.data.records[i].y0;
  }
  return treated_sum / static_cast<double>(s.treated.size()) -
         control_sum / static_cast<double>(s.control.size());
}

}  // namespace

void MethodSpec::validate() const {
  if (kind == MethodKind::NearestNeighbor && k < 1) {
    throw PreconditionError("nearest-neighbor matching requires k >= 1");
  }
  if ((kind == MethodKind::LocalLinear || kind == MethodKind::LocalLinearRegressionAdjusted) &&
      !(bandwidth > 0.0)) {
    throw PreconditionError("local-linear matching requires bandwidth > 0");
  }
}

std::string MethodSpec::label() const {
  std::string tag;
  switch (kind) {
    case MethodKind::MeanDifference: tag = "mean"; break;
    case MethodKind::NearestNeighbor: tag = "nn(k=" + std::to_string(k) + ")"; break;
    case MethodKind::LocalLinear: tag = "loclin(bw=" + csv::format_double(bandwidth) + ")"; break;
    case MethodKind::LocalLinearRegressionAdjusted:
      tag = "loclin-adj(bw=" + csv::format_double(bandwidth) + ")";
      break;
  }
  if (enforce_support) tag += "+support";
  return tag;
}

std::vector<MethodSpec> standard_method_suite() {
  std::vector<MethodSpec> methods;
  methods.push_back({MethodKind::MeanDifference, 1, 1.0, false});
  methods.push_back({MethodKind::NearestNeighbor, 1, 1.0, false});
  methods.push_back({MethodKind::NearestNeighbor, 10, 1.0, false});
  methods.push_back({MethodKind::NearestNeighbor, 1, 1.0, true});
  methods.push_back({MethodKind::NearestNeighbor, 10, 1.0, true});
  methods.push_back({MethodKind::LocalLinear, 1, 1.0, false});
  methods.push_back({MethodKind::LocalLinear, 1, 4.0, false});
  methods.push_back({MethodKind::LocalLinearRegressionAdjusted, 1, 1.0, false});
  methods.push_back({MethodKind::LocalLinearRegressionAdjusted, 1, 4.0, false});
  return methods;
}

FitResult counterfactual_fit(const std::vector<double>& control_x, std::size_t arity,
                             const std::vector<double>& control_y,
                             const std::vector<double>& target_x, const MethodSpec& method) {
  method.validate();
  if (arity == 0) throw PreconditionError("counterfactual_fit requires arity >= 1");
  if (control_y.empty()) throw PreconditionError("counterfactual_fit requires controls");
  if (control_x.size() != control_y.size() * arity) {
    throw PreconditionError("control_x size inconsistent with arity and control_y");
  }
  if (target_x.size() % arity != 0) {
    throw PreconditionError("target_x size is not a multiple of arity");
  }

  FitResult result;
  result.predictions.resize(target_x.size() / arity);
  if (result.predictions.empty()) return result;

  switch (method.kind) {
    case MethodKind::MeanDifference: {
      const double mean = mean_of(control_y);
      std::fill(result.predictions.begin(), result.predictions.end(), mean);
      break;
    }
    case MethodKind::NearestNeighbor: {
      if (static_cast<std::size_t>(method.k) > control_y.size()) {
        throw PreconditionError("nearest-neighbor k = " + std::to_string(method.k) +
                                " exceeds control count " + std::to_string(control_y.size()));
      }
      nn_predict(control_x, arity, control_y, target_x, method.k, result.predictions);
      break;
    }
    case MethodKind::LocalLinear:
    case MethodKind::LocalLinearRegressionAdjusted: {
      loclin_predict(control_x, arity, control_y, target_x, method.bandwidth,
                     result.predictions, result.degenerate_targets);
      break;
    }
  }
  return result;
}

FitResult counterfactual_fit(const std::vector<double>& control_x,
                             const std::vector<double>& control_y,
                             const std::vector<double>& target_x, const MethodSpec& method) {
  return counterfactual_fit(control_x, 1, control_y, target_x, method);
}

AttEstimate estimate_did(const CanonicalDataset& ds, const MethodSpec& method) {
  const PreparedSample s = prepare_sample(ds, method);
  AttEstimate est;
  est.estimand = Estimand::DID;
  est.value = did_on_sample(s);
  est.n_treated_used = s.treated.size();
  est.method = method;
  est.method.kind = MethodKind::MeanDifference;  // matching engine irrelevant
  return est;
}

AttEstimate estimate_m(const CanonicalDataset& ds, const MethodSpec& method) {
  const PreparedSample s = prepare_sample(ds, method);
  AttEstimate est;
  est.estimand = Estimand::M;
  est.value = matched_estimate(s, Response::Y1);
  est.n_treated_used = s.treated.size();
  est.method = method;
  return est;
}

AttEstimate estimate_didm(const CanonicalDataset& ds, const MethodSpec& method) {
  const PreparedSample s = prepare_sample(ds, method);
  AttEstimate est;
  est.estimand = Estimand::DIDM;
  est.value = matched_estimate(s, Response::Trend);
  est.n_treated_used = s.treated.size();
  est.method = method;
  return est;
}

BracketReport estimate_all(const CanonicalDataset& ds, const MethodSpec& method) {
  const PreparedSample s = prepare_sample(ds, method);

  BracketReport report;
  report.support_applied = s.support_applied;
  report.support = s.trim;

  report.m.estimand = Estimand::M;
  report.m.value = matched_estimate(s, Response::Y1);
  report.m.n_treated_used = s.treated.size();
  report.m.method = method;

  report.didm.estimand = Estimand::DIDM;
  report.didm.value = matched_estimate(s, Response::Trend);
  report.didm.n_treated_used = s.treated.size();
  report.didm.method = method;

  report.did.estimand = Estimand::DID;
  report.did.value = did_on_sample(s);
  report.did.n_treated_used = s.treated.size();
  report.did.method = method;
  report.did.method.kind = MethodKind::MeanDifference;

  report.gap_didm_m = report.didm.value - report.m.value;
  report.gap_did_didm = report.did.value - report.didm.value;
  report.ordering_holds = report.gap_didm_m >= 0.0 && report.gap_did_didm >= 0.0;
  return report;
}

}  // namespace bracket
