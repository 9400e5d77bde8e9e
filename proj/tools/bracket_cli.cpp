// Command-line front end: estimate / diagnose / simulate / adapt subcommands
// with JSON run reports, CSV outputs, and deterministic seeded runs.
//
// Exit codes: 0 success, 2 input error, 3 computation error, 4 verification
// failure (simulate --verify assertions).

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bracket/csv.hpp"
#include "bracket/dataset.hpp"
#include "bracket/diagnostics.hpp"
#include "bracket/errors.hpp"
#include "bracket/estimators.hpp"
#include "bracket/event_adapter.hpp"
#include "bracket/inference.hpp"
#include "bracket/parallel.hpp"
#include "bracket/simulator.hpp"
#include "bracket/version.hpp"

namespace fs = std::filesystem;
using bracket::InputError;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitComputation = 3;
constexpr int kExitVerification = 4;

// ---------------------------------------------------------------------------
// Shared flag bundles.

struct InputFlags {
  std::string input;
  std::string w = "w";
  std::string ylag = "y_lag";
  std::string y0 = "y0";
  std::string y1 = "y1";
  std::vector<std::string> covariates;
};

struct MethodFlags {
  std::string method = "mean";
  int k = 1;
  double bw = 1.0;
  bool support = false;
};

void add_input_flags(CLI::App* cmd, InputFlags* flags) {
  cmd->add_option("--input", flags->input, "input CSV path")->required();
  cmd->add_option("--w", flags->w, "treatment indicator column")->required();
  cmd->add_option("--ylag", flags->ylag, "lagged outcome column")->required();
  cmd->add_option("--y0", flags->y0, "pre-period outcome column")->required();
  cmd->add_option("--y1", flags->y1, "post-period outcome column")->required();
  cmd->add_option("--covariates", flags->covariates,
                  "comma-separated additional matching columns")
      ->delimiter(',');
}

void add_method_flags(CLI::App* cmd, MethodFlags* flags) {
  cmd->add_option("--method", flags->method, "estimation method")
      ->check(CLI::IsMember({"mean", "nn", "loclin", "loclin-adj"}))
      ->default_val("mean");
  cmd->add_option("--k", flags->k, "nearest-neighbor count")->default_val(1);
  cmd->add_option("--bw", flags->bw, "kernel bandwidth")->default_val(1.0);
  cmd->add_flag("--support", flags->support, "trim treated units to control support");
}

bracket::CanonicalDataset load_input(const InputFlags& flags) {
  bracket::CsvSchema schema;
  schema.w = flags.w;
  schema.y_lag = flags.ylag;
  schema.y0 = flags.y0;
  schema.y1 = flags.y1;
  schema.covariates = flags.covariates;
  return bracket::load_csv(flags.input, schema);
}

bracket::MethodSpec method_from_flags(const MethodFlags& flags) {
  bracket::MethodSpec spec;
  if (flags.method == "mean") {
    spec.kind = bracket::MethodKind::MeanDifference;
  } else if (flags.method == "nn") {
    spec.kind = bracket::MethodKind::NearestNeighbor;
  } else if (flags.method == "loclin") {
    spec.kind = bracket::MethodKind::LocalLinear;
  } else {
    spec.kind = bracket::MethodKind::LocalLinearRegressionAdjusted;
  }
  spec.k = flags.k;
  spec.bandwidth = flags.bw;
  spec.enforce_support = flags.support;
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// JSON report helpers.

json dataset_summary(const bracket::CanonicalDataset& ds, const std::string& path) {
  json j;
  j["path"] = path;
  j["n_records"] = ds.records.size();
  j["n_treated"] = ds.n_treated();
  j["n_control"] = ds.n_control();
  j["covariate_arity"] = ds.covariate_arity();
  j["covariate_names"] = ds.meta.covariate_names;
  j["notes"] = ds.meta.notes;
  return j;
}

json method_summary(const bracket::MethodSpec& method) {
  json j;
  j["label"] = method.label();
  switch (method.kind) {
    case bracket::MethodKind::MeanDifference: j["kind"] = "mean"; break;
    case bracket::MethodKind::NearestNeighbor: j["kind"] = "nn"; break;
    case bracket::MethodKind::LocalLinear: j["kind"] = "loclin"; break;
    case bracket::MethodKind::LocalLinearRegressionAdjusted: j["kind"] = "loclin-adj"; break;
  }
  j["k"] = method.k;
  j["bandwidth"] = method.bandwidth;
  j["enforce_support"] = method.enforce_support;
  return j;
}

json bracket_summary(const bracket::BracketReport& rep) {
  json j;
  j["m"] = rep.m.value;
  j["didm"] = rep.didm.value;
  j["did"] = rep.did.value;
  j["gap_didm_m"] = rep.gap_didm_m;
  j["gap_did_didm"] = rep.gap_did_didm;
  j["ordering_holds"] = rep.ordering_holds;
  j["n_treated_used"] = rep.m.n_treated_used;
  j["support_applied"] = rep.support_applied;
  if (rep.support_applied) {
    j["support"] = {{"lo", rep.support.support_lo},
                    {"hi", rep.support.support_hi},
                    {"n_treated_dropped", rep.support.n_treated_dropped}};
  }
  return j;
}

json interval_json(const bracket::Interval& ci) { return json{{"lo", ci.lo}, {"hi", ci.hi}}; }

std::string command_echo(int argc, char** argv) {
  std::string echo;
  for (int i = 0; i < argc; ++i) {
    if (i > 0) echo += ' ';
    echo += argv[i];
  }
  return echo;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open file for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw InputError("failed while writing: " + path.string());
}

/// Completes and writes report.json: attaches the manifest (every path must
/// already exist) plus the shared header fields.
void finish_report(json* report, const std::string& echo, const fs::path& out_dir,
                   std::vector<std::string> manifest) {
  json full;
  full["schema_version"] = bracket::kReportSchemaVersion;
  full["tool_version"] = bracket::kVersion;
  full["command"] = echo;
  for (auto& [key, value] : report->items()) full[key] = value;
  manifest.push_back("report.json");
  full["outputs"] = manifest;
  write_json(full, out_dir / "report.json");
  for (const auto& name : manifest) {
    if (!fs::exists(out_dir / name)) {
      throw bracket::ComputationError("manifest names a missing output: " + name);
    }
  }
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + out + "': " + ec.message());
  return dir;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  InputFlags input;
  MethodFlags method;
  std::string out;
  std::size_t bootstrap = 0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

void write_estimates_csv(const bracket::BracketReport& rep,
                         const std::optional<bracket::BracketCis>& cis,
                         const std::string& method_label, const fs::path& path) {
  bracket::csv::Table table;
  table.header = {"estimand", "value", "ci_lo", "ci_hi", "n_treated_used", "method"};
  auto row = [&](const std::string& name, double value,
                 const std::optional<bracket::Interval>& ci, std::size_t n_used) {
    table.rows.push_back({name, bracket::csv::format_double(value),
                          ci ? bracket::csv::format_double(ci->lo) : "",
                          ci ? bracket::csv::format_double(ci->hi) : "",
                          std::to_string(n_used), method_label});
  };
  auto opt = [&](const bracket::Interval& ci) -> std::optional<bracket::Interval> {
    return cis ? std::optional<bracket::Interval>(ci) : std::nullopt;
  };
  const std::size_t n_used = rep.m.n_treated_used;
  if (cis) {
    row("m", rep.m.value, opt(cis->ci_m), n_used);
    row("didm", rep.didm.value, opt(cis->ci_didm), n_used);
    row("did", rep.did.value, opt(cis->ci_did), n_used);
    row("gap_didm_m", rep.gap_didm_m, opt(cis->ci_gap_didm_m), n_used);
    row("gap_did_didm", rep.gap_did_didm, opt(cis->ci_gap_did_didm), n_used);
  } else {
    row("m", rep.m.value, std::nullopt, n_used);
    row("didm", rep.didm.value, std::nullopt, n_used);
    row("did", rep.did.value, std::nullopt, n_used);
    row("gap_didm_m", rep.gap_didm_m, std::nullopt, n_used);
    row("gap_did_didm", rep.gap_did_didm, std::nullopt, n_used);
  }
  bracket::csv::write_table(path.string(), table);
}

int run_estimate(const EstimateArgs& args, const std::string& echo) {
  const fs::path out_dir = prepare_out_dir(args.out);
  const bracket::CanonicalDataset ds = load_input(args.input);
  const bracket::MethodSpec method = method_from_flags(args.method);

  const bracket::BracketReport rep = bracket::estimate_all(ds, method);
  std::optional<bracket::BracketCis> cis;
  if (args.bootstrap > 0) {
    cis = bracket::bootstrap_brackets(ds, method, args.bootstrap, args.alpha, args.seed);
  }

  write_estimates_csv(rep, cis, method.label(), out_dir / "estimates.csv");

  json report;
  report["dataset"] = dataset_summary(ds, args.input.input);
  report["method"] = method_summary(method);
  report["estimates"] = bracket_summary(rep);
  if (cis) {
    json jb;
    jb["n_replicates"] = cis->n_replicates;
    jb["n_degenerate"] = cis->n_degenerate;
    jb["alpha"] = cis->alpha;
    jb["seed"] = cis->seed;
    jb["ci_m"] = interval_json(cis->ci_m);
    jb["ci_didm"] = interval_json(cis->ci_didm);
    jb["ci_did"] = interval_json(cis->ci_did);
    jb["ci_gap_didm_m"] = interval_json(cis->ci_gap_didm_m);
    jb["ci_gap_did_didm"] = interval_json(cis->ci_gap_did_didm);
    report["bootstrap"] = jb;
  }
  finish_report(&report, echo, out_dir, {"estimates.csv"});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
  InputFlags input;
  std::string out;
  std::string bins = "auto";
  std::size_t degree = 1;
  double alpha = 0.05;
  bool svg = false;
};

bracket::SeriesConfig series_from_flags(const DiagnoseArgs& args) {
  bracket::SeriesConfig cfg;
  cfg.degree = args.degree;
  if (args.bins != "auto") {
    try {
      const long long v = bracket::csv::parse_int(args.bins, 0, "--bins");
      if (v < 1) throw InputError("--bins must be >= 1 or 'auto'");
      cfg.n_bins = static_cast<std::size_t>(v);
    } catch (const bracket::ParseError&) {
      throw InputError("--bins must be an integer or 'auto', got '" + args.bins + "'");
    }
  }
  return cfg;
}

int run_diagnose(const DiagnoseArgs& args, const std::string& echo) {
  const fs::path out_dir = prepare_out_dir(args.out);
  const bracket::CanonicalDataset ds = load_input(args.input);
  const bracket::SeriesConfig cfg = series_from_flags(args);

  const bracket::SelectionReport sel = bracket::check_negative_selection(ds, cfg);
  const bracket::FosdReport fosd = bracket::check_fosd(ds, args.alpha);
  const bracket::MonotonicityReport mono = bracket::check_phi_monotone(ds, cfg);

  bracket::write_selection_csv(sel, (out_dir / "curves_selection.csv").string());
  bracket::write_fosd_csv(fosd, (out_dir / "cdf_fosd.csv").string());
  bracket::write_curve_csv(mono.curve, (out_dir / "curve_phi.csv").string());
  std::vector<std::string> manifest = {"curves_selection.csv", "cdf_fosd.csv",
                                       "curve_phi.csv"};
  if (args.svg) {
    bracket::write_selection_svg(sel, (out_dir / "curves_selection.svg").string());
    bracket::write_fosd_svg(fosd, (out_dir / "cdf_fosd.svg").string());
    bracket::write_monotonicity_svg(mono, (out_dir / "curve_phi.svg").string());
    manifest.insert(manifest.end(),
                    {"curves_selection.svg", "cdf_fosd.svg", "curve_phi.svg"});
  }

  json report;
  report["dataset"] = dataset_summary(ds, args.input.input);
  report["alpha"] = args.alpha;
  report["series"] = {{"bins", args.bins}, {"degree", args.degree}};
  json verdicts;
  verdicts["negative_selection"] = {
      {"verdict", bracket::verdict_label(sel.verdict)},
      {"max_gap", sel.max_gap},
  };
  verdicts["lag_dominance"] = {
      {"verdict", bracket::dominance_verdict_label(fosd.verdict)},
      {"max_violation", fosd.max_violation},
      {"dkw_epsilon_sum", fosd.dkw_epsilon_sum},
  };
  verdicts["trend_monotonicity"] = {
      {"verdict", bracket::monotonicity_verdict_label(mono.verdict)},
      {"max_increase", mono.max_increase},
      {"band_width_at_max", mono.band_width_at_max},
      {"slope", mono.slope},
  };
  report["verdicts"] = verdicts;

  if (ds.covariate_arity() > 0) {
    bracket::Assumption2Config a2;
    a2.series = cfg;
    const bracket::Assumption2Report multi = bracket::check_assumption2(ds, args.alpha, a2);
    report["multivariate"] = {
        {"selection", bracket::verdict_label(multi.selection)},
        {"dominance", bracket::dominance_verdict_label(multi.dominance)},
        {"monotonicity", bracket::monotonicity_verdict_label(multi.monotonicity)},
        {"selection_violation", multi.selection_violation},
        {"dominance_violation", multi.dominance_violation},
        {"monotonicity_violation", multi.monotonicity_violation},
        {"n_points_used", multi.n_points_used},
        {"warnings", multi.warnings},
    };
  }

  finish_report(&report, echo, out_dir, manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string dgp = "parametric";
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
  bool verify = false;
  double tol = 4.0;
  std::size_t bins = 20;
  // parametric parameters
  bracket::ParametricDgpSpec par;
  // counterexample parameters
  double mu0 = 0.0;
  double mu1 = -1.0;
  std::optional<double> p_pos_treated;
  std::optional<double> p_pos_control;
  double p_treated = 0.5;
};

const std::map<std::string, bracket::FailurePattern>& pattern_names() {
  static const std::map<std::string, bracket::FailurePattern> names = {
      {"m_holds_didm_fails", bracket::FailurePattern::MHoldsDidmFails},
      {"didm_holds_m_fails", bracket::FailurePattern::DidmHoldsMFails},
      {"didm_holds_did_fails", bracket::FailurePattern::DidmHoldsDidFails},
      {"did_holds_didm_fails", bracket::FailurePattern::DidHoldsDidmFails},
  };
  return names;
}

struct VerifyCheck {
  std::string name;
  bool pass;
  std::string detail;
};

json verify_checks_json(const std::vector<VerifyCheck>& checks) {
  json arr = json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  return arr;
}

/// Consistency: the observed outcomes must equal the potential-outcome branch
/// selected by each unit's treatment status, bit-exactly.
VerifyCheck check_consistency(const bracket::OraclePanel& panel,
                              const bracket::CanonicalDataset& obs) {
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    const auto& u = panel.units[i];
    const auto& rec = obs.records[i];
    const double want0 = u.w == 1 ? u.po_y0_1 : u.po_y0_0;
    const double want1 = u.w == 1 ? u.po_y1_1 : u.po_y1_0;
    if (rec.y0 != want0 || rec.y1 != want1) {
      return {"observed_equals_selected_branch", false,
              "unit " + u.unit_id + " observed outcome differs from its selected branch"};
    }
  }
  return {"observed_equals_selected_branch", true, "bit-exact for all units"};
}

int run_simulate(const SimulateArgs& args, const std::string& echo) {
  const fs::path out_dir = prepare_out_dir(args.out);

  bracket::OraclePanel panel;
  std::optional<bracket::ClosedForms> cf;
  std::optional<bracket::FailurePattern> pattern;
  json params;
  if (args.dgp == "parametric") {
    panel = bracket::simulate_parametric(args.par, args.n, args.seed);
    cf = bracket::closed_forms(args.par);
    params = {{"beta", args.par.beta},
              {"gamma", args.par.gamma},
              {"rho", args.par.rho},
              {"delta0", args.par.delta0},
              {"delta1", args.par.delta1},
              {"alpha_sd", args.par.alpha_sd},
              {"eps_sd", args.par.eps_sd},
              {"ylag_mean_treated", args.par.ylag_mean_treated},
              {"ylag_mean_control", args.par.ylag_mean_control},
              {"ylag_sd", args.par.ylag_sd},
              {"p_treated", args.par.p_treated}};
  } else if (args.dgp.rfind("counterexample:", 0) == 0) {
    const std::string name = args.dgp.substr(std::string("counterexample:").size());
    const auto it = pattern_names().find(name);
    if (it == pattern_names().end()) {
      throw InputError("unknown counterexample kind '" + name +
                       "'; expected one of m_holds_didm_fails, didm_holds_m_fails, "
                       "didm_holds_did_fails, did_holds_didm_fails");
    }
    pattern = it->second;
    bracket::CounterexampleKind kind = bracket::CounterexampleKind::defaults(it->second);
    kind.mu0 = args.mu0;
    kind.mu1 = args.mu1;
    if (args.p_pos_treated) kind.p_pos_treated = *args.p_pos_treated;
    if (args.p_pos_control) kind.p_pos_control = *args.p_pos_control;
    kind.p_treated = args.p_treated;
    panel = bracket::simulate_counterexample(kind, args.n, args.seed);
    params = {{"kind", name},
              {"mu0", kind.mu0},
              {"mu1", kind.mu1},
              {"p_pos_treated", kind.p_pos_treated},
              {"p_pos_control", kind.p_pos_control},
              {"p_treated", kind.p_treated}};
  } else {
    throw InputError("unknown --dgp '" + args.dgp +
                     "'; expected 'parametric' or 'counterexample:KIND'");
  }

  bracket::write_panel_csv(panel, (out_dir / "panel.csv").string());
  std::vector<std::string> manifest = {"panel.csv"};

  json report;
  report["dgp"] = args.dgp;
  report["params"] = params;
  report["n"] = args.n;
  report["seed"] = args.seed;
  report["true_att"] = panel.true_att;

  bool all_pass = true;
  if (args.verify) {
    const bracket::CanonicalDataset obs = panel.observed();
    std::vector<VerifyCheck> checks;
    checks.push_back(check_consistency(panel, obs));

    json verify;
    verify["schema_version"] = bracket::kReportSchemaVersion;
    verify["tol"] = args.tol;
    verify["true_att"] = panel.true_att;

    const bracket::MethodSpec mean{bracket::MethodKind::MeanDifference, 1, 1.0, false};
    const bracket::BracketReport est = bracket::estimate_all(obs, mean);
    verify["estimates"] = bracket_summary(est);

    const bracket::IdentificationErrors errs =
        bracket::identification_errors(panel, args.bins);
    verify["identification_errors"] = {
        {"d_m", errs.d_m},       {"d_didm", errs.d_didm},       {"d_did", errs.d_did},
        {"d_m_se", errs.d_m_se}, {"d_didm_se", errs.d_didm_se}, {"d_did_se", errs.d_did_se},
        {"n_cells_used", errs.n_cells_used},
    };

    const bracket::ConditionCheck cond = bracket::condition_check(panel, args.tol);
    verify["condition_check"] = {{"cond_m", cond.cond_m},
                                 {"cond_didm", cond.cond_didm},
                                 {"cond_did", cond.cond_did},
                                 {"n_cells_used", cond.n_cells_used}};

    if (cf) {
      verify["closed_forms"] = {{"m", cf->m}, {"didm", cf->didm}, {"did", cf->did}};
      const bool in_bracket_region = args.par.gamma <= 0.0 && args.par.rho >= 0.0 &&
                                     args.par.rho <= 1.0 &&
                                     args.par.ylag_mean_control >= args.par.ylag_mean_treated;
      if (in_bracket_region) {
        const bool ordered = cf->m <= cf->didm + 1e-12 && cf->didm <= cf->did + 1e-12;
        checks.push_back({"closed_form_ordering", ordered,
                          ordered ? "m <= didm <= did" : "closed forms out of order"});

        const double tol_gap1 = args.tol * (errs.d_m_se + errs.d_didm_se);
        const double tol_gap2 = args.tol * (errs.d_didm_se + errs.d_did_se);
        const bool err_ordered =
            errs.d_m <= errs.d_didm + tol_gap1 && errs.d_didm <= errs.d_did + tol_gap2;
        checks.push_back({"identification_error_ordering", err_ordered,
                          err_ordered ? "d_m <= d_didm <= d_did within tolerance"
                                      : "oracle identification errors out of order"});
      }
      // Oracle agreement: each identification error must match its closed
      // form minus the true effect within tol standard errors.
      const double beta = args.par.beta;
      auto close = [&](double got, double want, double se) {
        return std::abs(got - want) <= args.tol * se + 1e-9;
      };
      const bool agree = close(errs.d_m, cf->m - beta, errs.d_m_se) &&
                         close(errs.d_didm, cf->didm - beta, errs.d_didm_se) &&
                         close(errs.d_did, cf->did - beta, errs.d_did_se);
      checks.push_back({"identification_errors_match_closed_forms", agree,
                        agree ? "within tolerance" : "sample errors far from closed forms"});
    }

    if (pattern) {
      // Expected truth patterns; entries left unset are not asserted (some
      // constructions leave a condition's status free).
      std::optional<bool> want_m, want_didm, want_did;
      switch (*pattern) {
        case bracket::FailurePattern::MHoldsDidmFails:
          want_m = true;
          want_didm = false;
          want_did = false;
          break;
        case bracket::FailurePattern::DidmHoldsMFails:
          want_m = false;
          want_didm = true;
          want_did = true;
          break;
        case bracket::FailurePattern::DidmHoldsDidFails:
          want_didm = true;
          want_did = false;
          break;
        case bracket::FailurePattern::DidHoldsDidmFails:
          want_didm = false;
          want_did = true;
          break;
      }
      auto expect = [&](const char* name, std::optional<bool> want, bool got) {
        if (!want) return;
        const bool pass = got == *want;
        checks.push_back({std::string("condition_") + name, pass,
                          pass ? "matches the construction"
                               : std::string("expected ") + (*want ? "true" : "false") +
                                     ", got " + (got ? "true" : "false")});
      };
      expect("m", want_m, cond.cond_m);
      expect("didm", want_didm, cond.cond_didm);
      expect("did", want_did, cond.cond_did);
    }

    all_pass = std::all_of(checks.begin(), checks.end(),
                           [](const VerifyCheck& c) { return c.pass; });
    verify["checks"] = verify_checks_json(checks);
    verify["all_pass"] = all_pass;
    write_json(verify, out_dir / "verify.json");
    manifest.push_back("verify.json");

    if (!all_pass) {
      for (const auto& c : checks) {
        if (!c.pass) {
          std::cerr << "simulate: verification failed: " << c.name << " (" << c.detail
                    << ")\n";
        }
      }
    }
  }

  finish_report(&report, echo, out_dir, manifest);
  return all_pass ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------------------
// adapt

struct AdaptArgs {
  std::string input;
  std::string style = "lagm";
  std::string t = "0";
  int horizon = 0;
  int lags = 1;
  std::string comparison = "notyet";
  std::string out;
  bool estimate = false;
  MethodFlags method;
};

struct CellResult {
  int t;
  bracket::CanonicalDataset ds;
  std::optional<bracket::BracketReport> rep;
};

bracket::CanonicalDataset adapt_one(const bracket::LongPanel& panel, const AdaptArgs& args,
                                    int t) {
  bracket::CellSpec spec;
  spec.event_time = t;
  spec.horizon = args.horizon;
  spec.n_lags = static_cast<std::size_t>(args.lags);
  spec.comparison = args.comparison == "never" ? bracket::Comparison::NeverTreated
                                               : bracket::Comparison::NotYetTreated;
  if (args.style == "lagm") {
    spec.style = bracket::CellStyle::LagMatchedM;
    return bracket::adapt_lag_matched(panel, spec);
  }
  if (args.style == "cohort-did") {
    spec.style = bracket::CellStyle::CohortDid;
    return bracket::adapt_cohort_did(panel, spec);
  }
  spec.style = bracket::CellStyle::LocalProjectionDidm;
  std::vector<int> x_lags;
  for (int ell = 1; ell <= args.lags; ++ell) x_lags.push_back(ell);
  return bracket::adapt_local_projection(panel, spec, x_lags);
}

int run_adapt(const AdaptArgs& args, const std::string& echo) {
  const fs::path out_dir = prepare_out_dir(args.out);
  const bracket::LongPanel panel = bracket::load_long_csv(args.input);

  // Candidate switching periods: one explicit, or every adoption period with
  // --t all.
  std::vector<int> periods;
  bool sweep = false;
  if (args.t == "all") {
    sweep = true;
    std::set<int> adoption;
    for (const auto& row : panel.rows) {
      if (row.treated_at) adoption.insert(*row.treated_at);
    }
    periods.assign(adoption.begin(), adoption.end());
    if (periods.empty()) {
      throw bracket::ComputationError("no treated units in the panel: nothing to adapt");
    }
  } else {
    periods.push_back(
        static_cast<int>(bracket::csv::parse_int(args.t, 0, "--t")));
  }

  const bracket::MethodSpec method = method_from_flags(args.method);
  std::vector<CellResult> cells;
  std::vector<std::string> skipped;
  for (const int t : periods) {
    try {
      CellResult cell{t, adapt_one(panel, args, t), std::nullopt};
      if (args.estimate) cell.rep = bracket::estimate_all(cell.ds, method);
      cells.push_back(std::move(cell));
    } catch (const bracket::Error& e) {
      if (!sweep) throw;
      skipped.push_back(e.what());
    }
  }
  if (cells.empty()) {
    throw bracket::ComputationError("no usable cells: " +
                                    (skipped.empty() ? std::string("panel has no candidates")
                                                     : skipped.front()));
  }

  std::vector<std::string> manifest;
  for (const auto& cell : cells) {
    const std::string name =
        "cell_t" + std::to_string(cell.t) + "_h" + std::to_string(args.horizon) + ".csv";
    bracket::write_csv(cell.ds, (out_dir / name).string());
    manifest.push_back(name);
  }

  json report;
  report["input"] = args.input;
  report["style"] = args.style;
  report["horizon"] = args.horizon;
  report["lags"] = args.lags;
  report["comparison"] = args.comparison;
  report["n_cells"] = cells.size();
  report["skipped_cells"] = skipped;

  if (args.estimate) {
    bracket::csv::Table table;
    table.header = {"cell",        "n_treated", "n_control",    "m",
                    "didm",        "did",       "gap_didm_m",   "gap_did_didm",
                    "ordering_holds", "weight"};
    double wsum = 0.0, m_agg = 0.0, didm_agg = 0.0, did_agg = 0.0;
    for (const auto& cell : cells) {
      const double w = static_cast<double>(cell.rep->m.n_treated_used);
      wsum += w;
      m_agg += w * cell.rep->m.value;
      didm_agg += w * cell.rep->didm.value;
      did_agg += w * cell.rep->did.value;
    }
    json jcells = json::array();
    for (const auto& cell : cells) {
      const bracket::BracketReport& rep = *cell.rep;
      const double weight = static_cast<double>(rep.m.n_treated_used) / wsum;
      const std::string label = "t=" + std::to_string(cell.t);
      table.rows.push_back({label, std::to_string(cell.ds.n_treated()),
                            std::to_string(cell.ds.n_control()),
                            bracket::csv::format_double(rep.m.value),
                            bracket::csv::format_double(rep.didm.value),
                            bracket::csv::format_double(rep.did.value),
                            bracket::csv::format_double(rep.gap_didm_m),
                            bracket::csv::format_double(rep.gap_did_didm),
                            rep.ordering_holds ? "true" : "false",
                            bracket::csv::format_double(weight)});
      json jc = bracket_summary(rep);
      jc["cell"] = label;
      jc["weight"] = weight;
      jcells.push_back(jc);
    }
    const double m_w = m_agg / wsum, didm_w = didm_agg / wsum, did_w = did_agg / wsum;
    table.rows.push_back({"aggregate", "", "", bracket::csv::format_double(m_w),
                          bracket::csv::format_double(didm_w),
                          bracket::csv::format_double(did_w),
                          bracket::csv::format_double(didm_w - m_w),
                          bracket::csv::format_double(did_w - didm_w),
                          (m_w <= didm_w && didm_w <= did_w) ? "true" : "false", "1"});
    bracket::csv::write_table((out_dir / "brackets.csv").string(), table);
    manifest.push_back("brackets.csv");
    report["method"] = method_summary(method);
    report["cells"] = jcells;
    report["aggregate"] = {{"m", m_w},
                           {"didm", didm_w},
                           {"did", did_w},
                           {"weighting", "treated-count proportional"}};
  }

  finish_report(&report, echo, out_dir, manifest);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panel treatment-effect bracketing: matching, DID, and matched DID "
               "estimators with diagnostics, bootstrap inference, simulation oracles, "
               "and event-study adapters"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker thread cap (default: BRACKET_ATT_THREADS or 1)");

  EstimateArgs est;
  CLI::App* cmd_est = app.add_subcommand("estimate", "estimate the three effects on a CSV");
  add_input_flags(cmd_est, &est.input);
  add_method_flags(cmd_est, &est.method);
  cmd_est->add_option("--out", est.out, "output directory")->required();
  cmd_est->add_option("--bootstrap", est.bootstrap, "bootstrap replicates (0 = off)");
  cmd_est->add_option("--alpha", est.alpha, "bootstrap CI level")->default_val(0.05);
  cmd_est->add_option("--seed", est.seed, "bootstrap seed")->default_val(0);

  DiagnoseArgs diag;
  CLI::App* cmd_diag = app.add_subcommand("diagnose", "run the assumption checks on a CSV");
  add_input_flags(cmd_diag, &diag.input);
  cmd_diag->add_option("--out", diag.out, "output directory")->required();
  cmd_diag->add_option("--bins", diag.bins, "partition cells (integer or 'auto')")
      ->default_val("auto");
  cmd_diag->add_option("--degree", diag.degree, "polynomial degree")->default_val(1);
  cmd_diag->add_option("--alpha", diag.alpha, "dominance envelope level")->default_val(0.05);
  cmd_diag->add_flag("--svg", diag.svg, "also write SVG plots");

  SimulateArgs sim;
  CLI::App* cmd_sim = app.add_subcommand("simulate", "generate an oracle panel");
  cmd_sim->add_option("--dgp", sim.dgp, "parametric | counterexample:KIND")
      ->default_val("parametric");
  cmd_sim->add_option("--n", sim.n, "number of units")->required();
  cmd_sim->add_option("--seed", sim.seed, "master seed")->default_val(0);
  cmd_sim->add_option("--out", sim.out, "output directory")->required();
  cmd_sim->add_flag("--verify", sim.verify, "run oracle assertions (exit 4 on failure)");
  cmd_sim->add_option("--tol", sim.tol, "assertion tolerance in standard errors")
      ->default_val(4.0);
  cmd_sim->add_option("--bins", sim.bins, "lag cells for identification errors")
      ->default_val(20);
  cmd_sim->add_option("--beta", sim.par.beta, "treatment effect")->default_val(2.0);
  cmd_sim->add_option("--gamma", sim.par.gamma, "selection level shift")->default_val(-1.0);
  cmd_sim->add_option("--rho", sim.par.rho, "persistence")->default_val(0.5);
  cmd_sim->add_option("--delta0", sim.par.delta0, "time effect at t=0")->default_val(0.0);
  cmd_sim->add_option("--delta1", sim.par.delta1, "time effect at t=1")->default_val(0.0);
  cmd_sim->add_option("--alpha-sd", sim.par.alpha_sd, "unit effect spread")->default_val(1.0);
  cmd_sim->add_option("--eps-sd", sim.par.eps_sd, "shock spread")->default_val(1.0);
  cmd_sim->add_option("--ylag-mean-treated", sim.par.ylag_mean_treated,
                      "treated lag mean")
      ->default_val(0.0);
  cmd_sim->add_option("--ylag-mean-control", sim.par.ylag_mean_control,
                      "control lag mean")
      ->default_val(1.0);
  cmd_sim->add_option("--ylag-sd", sim.par.ylag_sd, "lag spread")->default_val(1.0);
  cmd_sim->add_option("--p-treated", sim.p_treated, "treatment share")->default_val(0.5);
  cmd_sim->add_option("--mu0", sim.mu0, "counterexample control level")->default_val(0.0);
  cmd_sim->add_option("--mu1", sim.mu1, "counterexample treated level")->default_val(-1.0);
  double ppt = 0.0, ppc = 0.0;
  CLI::Option* opt_ppt =
      cmd_sim->add_option("--p-pos-treated", ppt, "P(lag=+1 | treated) override");
  CLI::Option* opt_ppc =
      cmd_sim->add_option("--p-pos-control", ppc, "P(lag=+1 | control) override");

  AdaptArgs adapt;
  CLI::App* cmd_adapt = app.add_subcommand("adapt", "map a long panel to two-period cells");
  cmd_adapt->add_option("--input", adapt.input, "long-panel CSV (unit,time,y,treated_at)")
      ->required();
  cmd_adapt->add_option("--style", adapt.style, "cell construction")
      ->check(CLI::IsMember({"lagm", "cohort-did", "localproj"}))
      ->default_val("lagm");
  cmd_adapt->add_option("--t", adapt.t, "switching period (integer or 'all')")->required();
  cmd_adapt->add_option("--horizon", adapt.horizon, "periods after t for y1")
      ->default_val(0);
  cmd_adapt->add_option("--lags", adapt.lags, "matching lag window")->default_val(1);
  cmd_adapt->add_option("--comparison", adapt.comparison, "comparison group")
      ->check(CLI::IsMember({"never", "notyet"}))
      ->default_val("notyet");
  cmd_adapt->add_option("--out", adapt.out, "output directory")->required();
  cmd_adapt->add_flag("--estimate", adapt.estimate, "estimate each cell and aggregate");
  add_method_flags(cmd_adapt, &adapt.method);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message to stderr
    return kExitInput;
  }

  if (threads > 0) bracket::set_max_threads(static_cast<std::size_t>(threads));
  if (opt_ppt->count() > 0) sim.p_pos_treated = ppt;
  if (opt_ppc->count() > 0) sim.p_pos_control = ppc;
  sim.par.p_treated = sim.p_treated;

  const std::string echo = command_echo(argc, argv);
  std::string stage = "run";
  try {
    if (*cmd_est) {
      stage = "estimate";
      return run_estimate(est, echo);
    }
    if (*cmd_diag) {
      stage = "diagnose";
      return run_diagnose(diag, echo);
    }
    if (*cmd_sim) {
      stage = "simulate";
      return run_simulate(sim, echo);
    }
    stage = "adapt";
    return run_adapt(adapt, echo);
  } catch (const bracket::VerificationError& e) {
    std::cerr << stage << ": verification error: " << e.what() << '\n';
    return kExitVerification;
  } catch (const bracket::ComputationError& e) {
    std::cerr << stage << ": computation error: " << e.what() << '\n';
    return kExitComputation;
  } catch (const bracket::InputError& e) {
    std::cerr << stage << ": input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << stage << ": error: " << e.what() << '\n';
    return kExitComputation;
  }
}
