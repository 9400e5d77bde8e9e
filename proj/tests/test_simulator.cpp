#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bracket/errors.hpp"
#include "bracket/estimators.hpp"
#include "bracket/simulator.hpp"
#include "support.hpp"

using namespace bracket;
using testutil::TempDir;

TEST_SUITE("simulator") {

TEST_CASE("closed forms match hand-computed values") {
  SUBCASE("canonical parameterization") {
    const ParametricDgpSpec spec;  // defaults are the canonical values
    const ClosedForms cf = closed_forms(spec);
    // By hand: m = beta + (1+rho)*gamma = 2 - 1.5; didm = beta + rho*gamma
    // = 2 - 0.5; did = didm + rho*(1-rho)*(lag-mean gap) = 1.5 + 0.25.
    CHECK(cf.m == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cf.didm == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(cf.did == doctest::Approx(1.75).epsilon(1e-12));
  }
  SUBCASE("second hand-computed spec") {
    ParametricDgpSpec spec;
    spec.beta = 1.0;
    spec.gamma = -2.0;
    spec.rho = 0.25;
    spec.ylag_mean_control = 2.0;
    spec.ylag_mean_treated = 0.0;
    const ClosedForms cf = closed_forms(spec);
    CHECK(cf.m == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(cf.didm == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cf.did == doctest::Approx(0.875).epsilon(1e-12));
  }
}

TEST_CASE("gamma = 0 collapses M onto DIDM; rho in {0,1} collapses DIDM onto DID") {
  ParametricDgpSpec spec;
  spec.gamma = 0.0;
  const ClosedForms a = closed_forms(spec);
  CHECK(a.m == a.didm);

  ParametricDgpSpec unit_root;
  unit_root.rho = 1.0;
  CHECK(closed_forms(unit_root).didm == closed_forms(unit_root).did);
  ParametricDgpSpec no_persistence;
  no_persistence.rho = 0.0;
  CHECK(closed_forms(no_persistence).didm == closed_forms(no_persistence).did);
}

TEST_CASE("parametric panels satisfy the potential-outcome identities bit-exactly") {
  const ParametricDgpSpec spec;
  const OraclePanel panel = simulate_parametric(spec, 500, 42);
  REQUIRE(panel.units.size() == 500);
  const CanonicalDataset obs = panel.observed();
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    const OracleUnit& u = panel.units[i];
    // Treatment enters the pre-period only through gamma, so both t=0
    // branches coincide and the t=1 branches differ by exactly beta.
    CHECK(u.po_y0_0 == u.po_y0_1);
    CHECK(u.po_y1_1 - u.po_y1_0 == spec.beta);
    CHECK(obs.records[i].y0 == (u.w == 1 ? u.po_y0_1 : u.po_y0_0));
    CHECK(obs.records[i].y1 == (u.w == 1 ? u.po_y1_1 : u.po_y1_0));
    CHECK(obs.records[i].y_lag == u.y_lag);
  }
  CHECK(panel.true_att == spec.beta);
}

TEST_CASE("same seed reproduces the identical panel; different seeds differ") {
  const ParametricDgpSpec spec;
  const OraclePanel a = simulate_parametric(spec, 200, 7);
  const OraclePanel b = simulate_parametric(spec, 200, 7);
  const OraclePanel c = simulate_parametric(spec, 200, 8);
  REQUIRE(a.units.size() == b.units.size());
  bool all_equal = true, any_diff_c = false;
  for (std::size_t i = 0; i < a.units.size(); ++i) {
    all_equal = all_equal && a.units[i].y_lag == b.units[i].y_lag &&
                a.units[i].po_y1_0 == b.units[i].po_y1_0 && a.units[i].w == b.units[i].w;
    any_diff_c = any_diff_c || a.units[i].y_lag != c.units[i].y_lag;
  }
  CHECK(all_equal);
  CHECK(any_diff_c);
}

TEST_CASE("group moments match the specification at scale") {
  const ParametricDgpSpec spec;
  const OraclePanel panel = simulate_parametric(spec, 100000, 3);
  double sum_t = 0, sum_c = 0, sumsq_c = 0, n_t = 0, n_c = 0, sum_y0_c = 0, sum_y0_t = 0;
  for (const auto& u : panel.units) {
    if (u.w == 1) {
      sum_t += u.y_lag;
      sum_y0_t += u.po_y0_1;
      n_t += 1;
    } else {
      sum_c += u.y_lag;
      sumsq_c += u.y_lag * u.y_lag;
      sum_y0_c += u.po_y0_0;
      n_c += 1;
    }
  }
  CHECK(n_t / (n_t + n_c) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(sum_t / n_t) < 0.02);
  CHECK(sum_c / n_c == doctest::Approx(1.0).epsilon(0.02));
  const double var_c = sumsq_c / n_c - (sum_c / n_c) * (sum_c / n_c);
  CHECK(var_c == doctest::Approx(1.0).epsilon(0.05));
  // E[Y0 | W] = gamma*W + rho * E[Y_lag | W].
  CHECK(sum_y0_c / n_c == doctest::Approx(0.5).epsilon(0.05));
  CHECK(sum_y0_t / n_t == doctest::Approx(-1.0).epsilon(0.05));
}

TEST_CASE("mean-difference DID on a large panel matches the closed form") {
  const ParametricDgpSpec spec;
  const OraclePanel panel = simulate_parametric(spec, 50000, 4);
  const AttEstimate did = estimate_did(panel.observed());
  CHECK(std::abs(did.value - 1.75) < 0.05);
}

TEST_CASE("panel CSV round-trips the oracle columns bit-exactly") {
  const OraclePanel panel = simulate_parametric(ParametricDgpSpec{}, 60, 12);
  TempDir tmp("panelrt");
  write_panel_csv(panel, tmp.str("p.csv"));
  const OraclePanel back = read_panel_csv(tmp.str("p.csv"));
  REQUIRE(back.units.size() == panel.units.size());
  CHECK(back.true_att == panel.true_att);
  for (std::size_t i = 0; i < panel.units.size(); ++i) {
    CHECK(back.units[i].unit_id == panel.units[i].unit_id);
    CHECK(back.units[i].w == panel.units[i].w);
    CHECK(back.units[i].y_lag == panel.units[i].y_lag);
    CHECK(back.units[i].po_y0_0 == panel.units[i].po_y0_0);
    CHECK(back.units[i].po_y0_1 == panel.units[i].po_y0_1);
    CHECK(back.units[i].po_y1_0 == panel.units[i].po_y1_0);
    CHECK(back.units[i].po_y1_1 == panel.units[i].po_y1_1);
  }
}

TEST_CASE("identification errors at the canonical spec match closed-form gaps") {
  // Oracle identities: d_m = m - beta, d_didm = didm - beta, d_did =
  // did - beta, i.e. (-1.5, -0.5, -0.25) at the canonical values.
  const OraclePanel panel = simulate_parametric(ParametricDgpSpec{}, 100000, 5);
  const IdentificationErrors errs = identification_errors(panel, 20);
  CHECK(std::abs(errs.d_m + 1.5) < 0.05);
  CHECK(std::abs(errs.d_didm + 0.5) < 0.05);
  CHECK(std::abs(errs.d_did + 0.25) < 0.05);
  CHECK(errs.n_cells_used == 20);
  CHECK(errs.d_m_se > 0.0);
}

TEST_CASE("one-group cells are merged with a warning") {
  OraclePanel panel;
  // Lag value 5 appears only among controls, so its exact cell must merge.
  for (int i = 0; i < 30; ++i) {
    OracleUnit u;
    u.unit_id = "u" + std::to_string(i);
    u.w = i % 2;
    u.y_lag = (i % 3 == 0 && u.w == 0) ? 5.0 : 1.0;
    u.po_y0_0 = u.po_y0_1 = u.y_lag;
    u.po_y1_0 = u.y_lag + 1.0;
    u.po_y1_1 = u.po_y1_0 + 2.0;
    panel.units.push_back(u);
  }
  panel.true_att = 2.0;
  // Two quantile cells: the tie-respecting boundary separates the runs of
  // 1.0s and 5.0s, leaving the 5.0 cell without treated units.
  const IdentificationErrors errs = identification_errors(panel, 2);
  CHECK(errs.n_cells_used == 1);
  REQUIRE(!errs.warnings.empty());
  CHECK(errs.warnings.front().find("merged") != std::string::npos);
}

TEST_CASE("condition_check classifies the parametric DGP correctly") {
  SUBCASE("canonical: selection breaks all three conditions") {
    const OraclePanel panel = simulate_parametric(ParametricDgpSpec{}, 50000, 6);
    const ConditionCheck cond = condition_check(panel, 4.0);
    CHECK_FALSE(cond.cond_m);
    CHECK_FALSE(cond.cond_didm);
    CHECK_FALSE(cond.cond_did);
  }
  SUBCASE("gamma = 0 with a lag-mean gap: M and DIDM hold, DID fails") {
    ParametricDgpSpec spec;
    spec.gamma = 0.0;
    const OraclePanel panel = simulate_parametric(spec, 50000, 7);
    const ConditionCheck cond = condition_check(panel, 4.0);
    CHECK(cond.cond_m);
    CHECK(cond.cond_didm);
    CHECK_FALSE(cond.cond_did);
  }
  SUBCASE("gamma = 0 and equal lag means: everything holds") {
    ParametricDgpSpec spec;
    spec.gamma = 0.0;
    spec.ylag_mean_control = 0.0;
    const OraclePanel panel = simulate_parametric(spec, 50000, 8);
    const ConditionCheck cond = condition_check(panel, 4.0);
    CHECK(cond.cond_m);
    CHECK(cond.cond_didm);
    CHECK(cond.cond_did);
  }
}

TEST_CASE("counterexample constructions reproduce their condition patterns") {
  auto check_pattern = [](FailurePattern pattern, bool m, bool didm, bool did,
                          bool assert_m) {
    const CounterexampleKind kind = CounterexampleKind::defaults(pattern);
    const OraclePanel panel = simulate_counterexample(kind, 50000, 9);
    const ConditionCheck cond = condition_check(panel, 4.0);
    if (assert_m) CHECK(cond.cond_m == m);
    CHECK(cond.cond_didm == didm);
    CHECK(cond.cond_did == did);
  };
  check_pattern(FailurePattern::MHoldsDidmFails, true, false, false, true);
  check_pattern(FailurePattern::DidmHoldsMFails, false, true, true, true);
  check_pattern(FailurePattern::DidmHoldsDidFails, true, true, false, false);
  check_pattern(FailurePattern::DidHoldsDidmFails, false, false, true, false);
}

TEST_CASE("counterexample lag laws and binary support hold") {
  const CounterexampleKind kind =
      CounterexampleKind::defaults(FailurePattern::DidmHoldsDidFails);
  CHECK(kind.p_pos_treated == 0.25);
  CHECK(kind.p_pos_control == 0.75);
  const OraclePanel panel = simulate_counterexample(kind, 50000, 10);
  double sum_t = 0, n_t = 0, sum_c = 0, n_c = 0;
  for (const auto& u : panel.units) {
    REQUIRE((u.y_lag == 1.0 || u.y_lag == -1.0));
    (u.w == 1 ? sum_t : sum_c) += u.y_lag;
    (u.w == 1 ? n_t : n_c) += 1;
  }
  CHECK(sum_t / n_t == doctest::Approx(-0.5).epsilon(0.05));
  CHECK(sum_c / n_c == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("patterns with identical branches have exactly zero true ATT") {
  for (const FailurePattern p :
       {FailurePattern::DidmHoldsDidFails, FailurePattern::DidHoldsDidmFails}) {
    const OraclePanel panel =
        simulate_counterexample(CounterexampleKind::defaults(p), 1000, 11);
    CHECK(panel.true_att == 0.0);
    for (const auto& u : panel.units) {
      CHECK(u.po_y0_0 == u.po_y0_1);
      CHECK(u.po_y1_0 == u.po_y1_1);
    }
  }
}

TEST_CASE("counterexample parameter validation rejects impossible constructions") {
  CounterexampleKind flat = CounterexampleKind::defaults(FailurePattern::MHoldsDidmFails);
  flat.mu1 = flat.mu0;
  CHECK_THROWS_AS(flat.validate(), PreconditionError);

  CounterexampleKind skew = CounterexampleKind::defaults(FailurePattern::DidHoldsDidmFails);
  skew.p_pos_treated = 0.7;  // lag means no longer sum to zero
  CHECK_THROWS_AS(skew.validate(), PreconditionError);
}

TEST_CASE("simulator preconditions") {
  CHECK_THROWS_AS(simulate_parametric(ParametricDgpSpec{}, 1, 0), PreconditionError);
  CHECK_THROWS_AS(
      simulate_counterexample(CounterexampleKind::defaults(FailurePattern::MHoldsDidmFails),
                              99, 0),
      PreconditionError);
  ParametricDgpSpec bad;
  bad.p_treated = 1.0;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
  CHECK_THROWS_AS(identification_errors(simulate_parametric(ParametricDgpSpec{}, 100, 0), 0),
                  PreconditionError);
}

}  // TEST_SUITE
