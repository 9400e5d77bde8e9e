#include "bracket/dataset.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "bracket/csv.hpp"
#include "bracket/errors.hpp"

namespace bracket {

namespace {

int require_column(const csv::Table& table, const std::string& name, const std::string& path) {
  const int idx = table.column(name);
  if (idx < 0) {
    throw SchemaError("missing required column '" + name + "' in " + path);
  }
  return idx;
}

}  // namespace

std::size_t CanonicalDataset::n_treated() const {
  std::size_t n = 0;
  for (const auto& r : records) n += (r.w == 1);
  return n;
}

std::size_t CanonicalDataset::n_control() const {
  std::size_t n = 0;
  for (const auto& r : records) n += (r.w == 0);
  return n;
}

CanonicalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  const csv::Table table = csv::read_table(path);

  const int w_col = require_column(table, schema.w, path);
  const int ylag_col = require_column(table, schema.y_lag, path);
  const int y0_col = require_column(table, schema.y0, path);
  const int y1_col = require_column(table, schema.y1, path);
  int id_col = -1;
  if (!schema.unit_id.empty()) {
    id_col = require_column(table, schema.unit_id, path);
  } else {
    id_col = table.column("unit_id");  // optional auto-detected id column
  }
  std::vector<int> cov_cols;
  cov_cols.reserve(schema.covariates.size());
  for (const auto& name : schema.covariates) {
    cov_cols.push_back(require_column(table, name, path));
  }

  CanonicalDataset ds;
  ds.meta.covariate_names = schema.covariates;
  ds.meta.notes.push_back("loaded from " + path);
  ds.records.reserve(table.rows.size());

  std::unordered_set<std::string> seen_ids;
  seen_ids.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t row_no = i + 2;  // 1-based, after the header row
    UnitRecord rec;
    rec.unit_id = id_col >= 0 ? row[static_cast<std::size_t>(id_col)]
                              : "row" + std::to_string(row_no);
    const long long w = csv::parse_int(row[static_cast<std::size_t>(w_col)], row_no, schema.w);
    if (w != 0 && w != 1) {
      throw DomainError("row " + std::to_string(row_no) + ": w = " + std::to_string(w) +
                        " outside {0,1}");
    }
    rec.w = static_cast<int>(w);
    rec.y_lag = csv::parse_double(row[static_cast<std::size_t>(ylag_col)], row_no, schema.y_lag);
    rec.y0 = csv::parse_double(row[static_cast<std::size_t>(y0_col)], row_no, schema.y0);
    rec.y1 = csv::parse_double(row[static_cast<std::size_t>(y1_col)], row_no, schema.y1);
    rec.covariates.reserve(cov_cols.size());
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      rec.covariates.push_back(csv::parse_double(row[static_cast<std::size_t>(cov_cols[c])],
                                                 row_no, schema.covariates[c]));
    }
    if (!seen_ids.insert(rec.unit_id).second) {
      throw InputError("duplicate unit_id '" + rec.unit_id + "' at row " +
                       std::to_string(row_no));
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void write_csv(const CanonicalDataset& ds, const std::string& path) {
  csv::Table table;
  table.header = {"unit_id", "w", "y_lag", "y0", "y1"};
  for (std::size_t c = 0; c < ds.covariate_arity(); ++c) {
    table.header.push_back(c < ds.meta.covariate_names.size() ? ds.meta.covariate_names[c]
                                                              : "x" + std::to_string(c + 1));
  }
  table.rows.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    std::vector<std::string> row;
    row.reserve(table.header.size());
    row.push_back(r.unit_id);
    row.push_back(std::to_string(r.w));
    row.push_back(csv::format_double(r.y_lag));
    row.push_back(csv::format_double(r.y0));
    row.push_back(csv::format_double(r.y1));
    for (const double x : r.covariates) row.push_back(csv::format_double(x));
    table.rows.push_back(std::move(row));
  }
  csv::write_table(path, table);
}

ValidationReport validate(const CanonicalDataset& ds) {
  ValidationReport report;
  report.covariate_arity = ds.covariate_arity();
  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  double cmin = tmin, cmax = -tmin;
  for (const auto& r : ds.records) {
    if (r.w == 1) {
      ++report.n_treated;
      tmin = std::min(tmin, r.y_lag);
      tmax = std::max(tmax, r.y_lag);
    } else {
      ++report.n_control;
      cmin = std::min(cmin, r.y_lag);
      cmax = std::max(cmax, r.y_lag);
    }
  }
  if (report.n_treated == 0) {
    report.flags.push_back("no treated units");
  } else {
    report.ylag_min_treated = tmin;
    report.ylag_max_treated = tmax;
    if (tmin == tmax) report.flags.push_back("degenerate treated support");
  }
  if (report.n_control == 0) {
    report.flags.push_back("no control units");
  } else {
    report.ylag_min_control = cmin;
    report.ylag_max_control = cmax;
    if (cmin == cmax) report.flags.push_back("degenerate control support");
  }
  std::unordered_set<std::string> ids;
  ids.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    if (!ids.insert(r.unit_id).second) {
      report.flags.push_back("duplicate unit_id: " + r.unit_id);
    }
  }
  if (ds.records.empty()) report.flags.push_back("empty dataset");
  return report;
}

CanonicalDataset residualize(const CanonicalDataset& ds, const std::vector<Field>& targets) {
  const std::size_t p = ds.covariate_arity();
  if (p == 0) {
    throw PreconditionError("residualize requires covariate arity >= 1");
  }
  const std::size_t n = ds.records.size();
  if (n < p + 1) {
    throw PreconditionError("residualize requires at least arity+1 records");
  }

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
  for (std::size_t i = 0; i < n; ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t c = 0; c < p; ++c) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c + 1)) =
          ds.records[i].covariates[c];
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(p + 1)) {
    // The columns permuted beyond the rank are the linearly dependent ones.
    const auto perm = qr.colsPermutation().indices();
    std::string column = "(intercept)";
    for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) {
      const Eigen::Index original = perm(k);
      if (original > 0) {
        const std::size_t c = static_cast<std::size_t>(original - 1);
        column = c < ds.meta.covariate_names.size() ? ds.meta.covariate_names[c]
                                                    : "x" + std::to_string(c + 1);
        break;
      }
    }
    throw SingularityError("rank-deficient covariate design; collinear column: " + column);
  }

  auto residual_of = [&](auto&& getter) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = getter(ds.records[i]);
    const Eigen::VectorXd coef = qr.solve(y);
    return (y - design * coef).eval();
  };

  CanonicalDataset out = ds;
  for (const Field target : targets) {
    switch (target) {
      case Field::YLag: {
        const Eigen::VectorXd r = residual_of([](const UnitRecord& u) { return u.y_lag; });
        for (std::size_t i = 0; i < n; ++i) out.records[i].y_lag = r(static_cast<Eigen::Index>(i));
        break;
      }
      case Field::Y0: {
        const Eigen::VectorXd r = residual_of([](const UnitRecord& u) { return u.y0; });
        for (std::size_t i = 0; i < n; ++i) out.records[i].y0 = r(static_cast<Eigen::Index>(i));
        break;
      }
      case Field::Y1: {
        const Eigen::VectorXd r = residual_of([](const UnitRecord& u) { return u.y1; });
        for (std::size_t i = 0; i < n; ++i) out.records[i].y1 = r(static_cast<Eigen::Index>(i));
        break;
      }
    }
  }
  std::string note = "residualized on pooled covariates:";
  for (std::size_t c = 0; c < p; ++c) {
    note += ' ';
    note += c < ds.meta.covariate_names.size() ? ds.meta.covariate_names[c]
                                               : "x" + std::to_string(c + 1);
  }
  for (auto& rec : out.records) rec.covariates.clear();
  out.meta.covariate_names.clear();
  out.meta.notes.push_back(note);
  return out;
}

std::pair<CanonicalDataset, SupportTrimReport> common_support(const CanonicalDataset& ds) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n_control = 0, n_treated = 0;
  for (const auto& r : ds.records) {
    if (r.w == 0) {
      ++n_control;
      lo = std::min(lo, r.y_lag);
      hi = std::max(hi, r.y_lag);
    } else {
      ++n_treated;
    }
  }
  if (n_control == 0 || n_treated == 0) {
    throw PreconditionError("common_support requires both groups nonempty");
  }

  SupportTrimReport report;
  report.support_lo = lo;
  report.support_hi = hi;

  CanonicalDataset out;
  out.meta = ds.meta;
  out.records.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    if (r.w == 1 && (r.y_lag < lo || r.y_lag > hi)) {
      ++report.n_treated_dropped;
      continue;
    }
    out.records.push_back(r);
  }
  if (report.n_treated_dropped == n_treated) {
    throw DegenerateSampleError("common support trimmed every treated unit");
  }
  if (report.n_treated_dropped > 0) {
    out.meta.notes.push_back("common-support trim dropped " +
                             std::to_string(report.n_treated_dropped) + " treated unit(s)");
  }
  return {std::move(out), report};
}

}  // namespace bracket
