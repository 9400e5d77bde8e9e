#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace bracket {

/**
 * One unit of a two-period panel.
 *
 * w      : treatment group (0 control, 1 treated)
 * y_lag  : the matching criterion (lagged outcome, same units as outcomes)
 * y0, y1 : pre- and post-treatment outcomes
 * covariates : optional auxiliary numeric covariates (uniform arity per dataset)
 */
struct UnitRecord {
  std::string unit_id;
  int w = 0;
  double y_lag = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;
  std::vector<double> covariates;
};

struct DatasetMeta {
  /// Lag order s of y_lag relative to the pre period (recorded by producers;
  /// s = 0 means y_lag is y0 itself).
  int lag_order = 1;
  std::vector<std::string> covariate_names;
  /// Free-form provenance notes (source file, residualization, trimming...).
  std::vector<std::string> notes;
};

/// Universal input to every estimator and diagnostic.
struct CanonicalDataset {
  std::vector<UnitRecord> records;
  DatasetMeta meta;

  std::size_t covariate_arity() const {
    return records.empty() ? meta.covariate_names.size() : records.front().covariates.size();
  }
  std::size_t n_treated() const;
  std::size_t n_control() const;
};

/// Column-name mapping for load_csv. An empty unit_id means: use a column
/// literally named "unit_id" when present, else synthesize row-number ids.
struct CsvSchema {
  std::string unit_id;
  std::string w = "w";
  std::string y_lag = "y_lag";
  std::string y0 = "y0";
  std::string y1 = "y1";
  std::vector<std::string> covariates;
};

/**
 * Reads a CSV file (UTF-8, comma-delimited, header row) into a dataset.
 * Row order is preserved. Errors: SchemaError naming a missing column;
 * ParseError with the row number for non-numeric/non-finite cells;
 * DomainError with the row number for w outside {0,1}; InputError for
 * duplicate unit ids.
 */
CanonicalDataset load_csv(const std::string& path, const CsvSchema& schema = {});

/// Serializes a dataset back to CSV; numeric values round-trip bit-exactly.
void write_csv(const CanonicalDataset& ds, const std::string& path);

struct ValidationReport {
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  std::size_t covariate_arity = 0;
  double ylag_min_treated = 0.0, ylag_max_treated = 0.0;
  double ylag_min_control = 0.0, ylag_max_control = 0.0;
  std::vector<std::string> flags;
};

/// Report-only summary: group sizes, arity, per-group y_lag range, and flags
/// ("no treated units", "degenerate control support", ...). Never throws.
ValidationReport validate(const CanonicalDataset& ds);

/// Fields that residualize() may target.
enum class Field { YLag, Y0, Y1 };

/**
 * Replaces each targeted field with its least-squares residual from a pooled
 * regression on (intercept + covariates); output covariate arity is 0 and the
 * covariates used are recorded in meta.notes. Errors: PreconditionError when
 * arity is 0; SingularityError naming the collinear column when the design is
 * rank deficient.
 */
CanonicalDataset residualize(const CanonicalDataset& ds, const std::vector<Field>& targets);

struct SupportTrimReport {
  std::size_t n_treated_dropped = 0;
  std::size_t n_control_dropped = 0;  // always 0 under the min-max rule
  double support_lo = 0.0;
  double support_hi = 0.0;
};

/**
 * Common-support trimming, min-max rule: treated records with y_lag outside
 * [min, max] of control y_lag are removed; controls are never removed.
 * Errors: PreconditionError when a group is empty; DegenerateSampleError when
 * every treated unit is trimmed.
 */
std::pair<CanonicalDataset, SupportTrimReport> common_support(const CanonicalDataset& ds);

}  // namespace bracket
