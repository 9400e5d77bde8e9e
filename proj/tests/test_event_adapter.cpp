#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bracket/errors.hpp"
#include "bracket/estimators.hpp"
#include "bracket/event_adapter.hpp"
#include "bracket/rng.hpp"
#include "support.hpp"

using namespace bracket;
using testutil::TempDir;

namespace {

LongRow lrow(std::string unit, int time, double y, std::optional<int> treated_at) {
  LongRow r;
  r.unit_id = std::move(unit);
  r.time = time;
  r.outcome = y;
  r.treated_at = treated_at;
  return r;
}

/// Three balanced units over times 0..3:
///   A adopts at 2 (1, 2, 6, 7), B adopts at 3 (0, 1, 2, 6), C never (0,1,2,3).
LongPanel cohort_hand_panel() {
  LongPanel panel;
  const std::vector<double> ya = {1, 2, 6, 7}, yb = {0, 1, 2, 6}, yc = {0, 1, 2, 3};
  for (int t = 0; t < 4; ++t) {
    panel.rows.push_back(lrow("A", t, ya[static_cast<std::size_t>(t)], 2));
    panel.rows.push_back(lrow("B", t, yb[static_cast<std::size_t>(t)], 3));
    panel.rows.push_back(lrow("C", t, yc[static_cast<std::size_t>(t)], std::nullopt));
  }
  panel.validate_and_finalize();
  return panel;
}

const UnitRecord* find_unit(const CanonicalDataset& ds, const std::string& id) {
  for (const auto& r : ds.records) {
    if (r.unit_id == id) return &r;
  }
  return nullptr;
}

}  // namespace

TEST_SUITE("event_adapter") {

TEST_CASE("long panel round-trips through CSV byte-faithfully") {
  LongPanel panel;
  panel.rows.push_back(lrow("u1", -1, 0.123456789012345, std::nullopt));
  panel.rows.push_back(lrow("u1", 0, -3.5e-7, std::nullopt));
  panel.rows.push_back(lrow("u2", -1, 1e6, 0));
  panel.rows.push_back(lrow("u2", 0, 7.25, 0));
  panel.validate_and_finalize();
  CHECK(panel.balanced);

  TempDir tmp("longcsv");
  write_long_csv(panel, tmp.str("panel.csv"));
  const LongPanel back = load_long_csv(tmp.str("panel.csv"));
  REQUIRE(back.rows.size() == panel.rows.size());
  for (std::size_t i = 0; i < panel.rows.size(); ++i) {
    CHECK(back.rows[i].unit_id == panel.rows[i].unit_id);
    CHECK(back.rows[i].time == panel.rows[i].time);
    CHECK(back.rows[i].outcome == panel.rows[i].outcome);  // bit-exact
    CHECK(back.rows[i].treated_at == panel.rows[i].treated_at);
  }
  CHECK(back.balanced);
}

TEST_CASE("long panel validation rejects defects") {
  LongPanel dup;
  dup.rows.push_back(lrow("a", 1, 0.0, std::nullopt));
  dup.rows.push_back(lrow("a", 1, 1.0, std::nullopt));
  CHECK_THROWS_WITH_AS(dup.validate_and_finalize(),
                       doctest::Contains("duplicate observation"), InputError);

  LongPanel inconsistent;
  inconsistent.rows.push_back(lrow("a", 1, 0.0, 2));
  inconsistent.rows.push_back(lrow("a", 2, 1.0, 3));
  CHECK_THROWS_WITH_AS(inconsistent.validate_and_finalize(),
                       doctest::Contains("inconsistent treated_at"), InputError);

  LongPanel unbalanced;
  unbalanced.rows.push_back(lrow("a", 1, 0.0, std::nullopt));
  unbalanced.rows.push_back(lrow("a", 2, 0.0, std::nullopt));
  unbalanced.rows.push_back(lrow("b", 1, 0.0, std::nullopt));
  unbalanced.validate_and_finalize();
  CHECK_FALSE(unbalanced.balanced);
}

TEST_CASE("load_long_csv reports missing columns by name") {
  TempDir tmp("longschema");
  testutil::write_text(tmp.str("bad.csv"), "unit,time,y\na,1,2.0\n");
  CHECK_THROWS_WITH_AS(load_long_csv(tmp.str("bad.csv")),
                       doctest::Contains("treated_at"), SchemaError);
}

TEST_CASE("lag-matched cell classifies switchers, comparisons, and early adopters") {
  // A switches at 2, B never treated, C treated since 1 (must vanish).
  LongPanel panel;
  const std::vector<double> ya = {1.0, 2.0, 5.0}, yb = {0.5, 1.0, 1.5}, yc = {9, 9, 9};
  for (int t = 0; t < 3; ++t) {
    panel.rows.push_back(lrow("A", t, ya[static_cast<std::size_t>(t)], 2));
    panel.rows.push_back(lrow("B", t, yb[static_cast<std::size_t>(t)], std::nullopt));
    panel.rows.push_back(lrow("C", t, yc[static_cast<std::size_t>(t)], 1));
  }
  panel.validate_and_finalize();

  CellSpec spec;
  spec.style = CellStyle::LagMatchedM;
  spec.event_time = 2;
  spec.horizon = 0;
  spec.n_lags = 1;
  const CanonicalDataset ds = adapt_lag_matched(panel, spec);
  REQUIRE(ds.records.size() == 2);
  CHECK(ds.n_treated() == 1);
  CHECK(ds.n_control() == 1);
  CHECK(find_unit(ds, "C") == nullptr);
  const UnitRecord* a = find_unit(ds, "A");
  REQUIRE(a != nullptr);
  CHECK(a->w == 1);
  CHECK(a->y_lag == 2.0);  // Y at t-1
  CHECK(a->y0 == 2.0);     // anchored at the same pre-period
  CHECK(a->y1 == 5.0);     // Y at t+horizon
  const UnitRecord* b = find_unit(ds, "B");
  REQUIRE(b != nullptr);
  CHECK(b->w == 0);
  CHECK(b->y_lag == 1.0);
  CHECK(b->y1 == 1.5);
}

TEST_CASE("lag-matched window exposes earlier lags as covariates") {
  LongPanel panel;
  for (int t = 0; t < 5; ++t) {
    panel.rows.push_back(lrow("s", t, 10.0 + t, 4));
    panel.rows.push_back(lrow("c", t, 20.0 + t, std::nullopt));
  }
  panel.validate_and_finalize();

  CellSpec spec;
  spec.event_time = 4;
  spec.n_lags = 3;
  const CanonicalDataset ds = adapt_lag_matched(panel, spec);
  REQUIRE(ds.covariate_arity() == 2);
  CHECK(ds.meta.covariate_names == std::vector<std::string>{"lag2", "lag3"});
  const UnitRecord* s = find_unit(ds, "s");
  REQUIRE(s != nullptr);
  CHECK(s->y_lag == 13.0);                                    // Y at t-1
  CHECK(s->covariates == std::vector<double>{12.0, 11.0});    // Y at t-2, t-3
}

TEST_CASE("units missing a required period are excluded and counted") {
  LongPanel panel;
  for (int t = 0; t < 3; ++t) {
    panel.rows.push_back(lrow("s", t, 1.0 + t, 2));
    panel.rows.push_back(lrow("ok", t, 2.0 + t, std::nullopt));
  }
  panel.rows.push_back(lrow("gappy", 1, 5.0, std::nullopt));  // missing t=2
  panel.validate_and_finalize();

  CellSpec spec;
  spec.event_time = 2;
  const CanonicalDataset ds = adapt_lag_matched(panel, spec);
  CHECK(ds.records.size() == 2);
  CHECK(find_unit(ds, "gappy") == nullptr);
  bool noted = false;
  for (const auto& note : ds.meta.notes) {
    if (note.find("excluded 1 units with missing required periods") != std::string::npos) {
      noted = true;
    }
  }
  CHECK(noted);
}

TEST_CASE("cells with no switchers or no comparisons raise ComputationError") {
  LongPanel panel;
  for (int t = 0; t < 3; ++t) {
    panel.rows.push_back(lrow("a", t, 1.0, 2));
    panel.rows.push_back(lrow("b", t, 2.0, std::nullopt));
  }
  panel.validate_and_finalize();

  CellSpec none;
  none.event_time = 1;  // nobody adopts at 1
  CHECK_THROWS_WITH_AS(adapt_lag_matched(panel, none), doctest::Contains("switch"),
                       ComputationError);

  LongPanel all_adopt;
  for (int t = 0; t < 3; ++t) {
    all_adopt.rows.push_back(lrow("a", t, 1.0, 2));
    all_adopt.rows.push_back(lrow("b", t, 2.0, 2));
  }
  all_adopt.validate_and_finalize();
  CellSpec empty_cmp;
  empty_cmp.event_time = 2;
  CHECK_THROWS_WITH_AS(adapt_lag_matched(all_adopt, empty_cmp),
                       doctest::Contains("comparison set is empty"), ComputationError);
}

TEST_CASE("cohort cells on the hand panel both give DID = 3") {
  const LongPanel panel = cohort_hand_panel();

  CellSpec g2;
  g2.style = CellStyle::CohortDid;
  g2.event_time = 2;
  g2.horizon = 0;
  const CanonicalDataset cell_g2 = adapt_cohort_did(panel, g2);
  CHECK(cell_g2.n_treated() == 1);
  CHECK(cell_g2.n_control() == 2);  // B (not yet treated at 2) and C
  CHECK(estimate_did(cell_g2).value == doctest::Approx(3.0).epsilon(1e-14));

  CellSpec g3;
  g3.style = CellStyle::CohortDid;
  g3.event_time = 3;
  g3.horizon = 0;
  const CanonicalDataset cell_g3 = adapt_cohort_did(panel, g3);
  CHECK(cell_g3.n_treated() == 1);
  CHECK(cell_g3.n_control() == 1);  // only C; A was treated earlier
  CHECK(find_unit(cell_g3, "A") == nullptr);
  CHECK(estimate_did(cell_g3).value == doctest::Approx(3.0).epsilon(1e-14));

  // Longer horizon for the first cohort: anchored at g-1 = 1, observed at 3.
  CellSpec g2h1;
  g2h1.style = CellStyle::CohortDid;
  g2h1.event_time = 2;
  g2h1.horizon = 1;
  const CanonicalDataset cell_g2h1 = adapt_cohort_did(panel, g2h1);
  CHECK(cell_g2h1.n_control() == 1);  // B adopts at 3 <= observation period
  CHECK(find_unit(cell_g2h1, "B") == nullptr);
  CHECK(estimate_did(cell_g2h1).value == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("never-treated comparison shrinks the cohort comparison set") {
  const LongPanel panel = cohort_hand_panel();
  CellSpec spec;
  spec.style = CellStyle::CohortDid;
  spec.event_time = 2;
  spec.horizon = 0;
  spec.comparison = Comparison::NeverTreated;
  const CanonicalDataset ds = adapt_cohort_did(panel, spec);
  CHECK(ds.n_control() == 1);
  CHECK(find_unit(ds, "B") == nullptr);
  CHECK(find_unit(ds, "C") != nullptr);
  CHECK(estimate_did(ds).value == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("local projection with the single first lag collapses DIDM onto M") {
  // y_lag equals the pre-period outcome, so the matched trend contrast and the
  // matched level contrast coincide when the fit reproduces the identity map.
  LongPanel panel;
  rng::Stream s(80, 0);
  for (int i = 0; i < 30; ++i) {
    const bool treated = i % 2 == 0;
    const std::string id = "u" + std::to_string(i);
    double y = s.next_normal();
    for (int t = 0; t < 3; ++t) {
      panel.rows.push_back(
          lrow(id, t, y, treated ? std::optional<int>(2) : std::nullopt));
      y += 0.3 * s.next_normal() + (treated && t == 1 ? 1.0 : 0.0);
    }
  }
  panel.validate_and_finalize();

  CellSpec spec;
  spec.style = CellStyle::LocalProjectionDidm;
  spec.event_time = 2;
  spec.horizon = 0;
  const CanonicalDataset ds = adapt_local_projection(panel, spec, {1});
  for (const auto& r : ds.records) CHECK(r.y_lag == r.y0);

  MethodSpec loclin;
  loclin.kind = MethodKind::LocalLinear;
  loclin.bandwidth = 1.0;
  const BracketReport report = estimate_all(ds, loclin);
  CHECK(std::abs(report.didm.value - report.m.value) <= 1e-12);
}

TEST_CASE("local projection with empty lags equals the cohort cell at horizon 0") {
  const LongPanel panel = cohort_hand_panel();
  CellSpec lp;
  lp.style = CellStyle::LocalProjectionDidm;
  lp.event_time = 2;
  lp.horizon = 0;
  const CanonicalDataset a = adapt_local_projection(panel, lp, {});
  CellSpec cd;
  cd.style = CellStyle::CohortDid;
  cd.event_time = 2;
  cd.horizon = 0;
  const CanonicalDataset b = adapt_cohort_did(panel, cd);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].unit_id == b.records[i].unit_id);
    CHECK(a.records[i].w == b.records[i].w);
    CHECK(a.records[i].y_lag == b.records[i].y_lag);
    CHECK(a.records[i].y0 == b.records[i].y0);
    CHECK(a.records[i].y1 == b.records[i].y1);
  }
  CHECK(estimate_did(a).value == estimate_did(b).value);
}

TEST_CASE("local projection rejects non-positive conditioning lags") {
  const LongPanel panel = cohort_hand_panel();
  CellSpec spec;
  spec.style = CellStyle::LocalProjectionDidm;
  spec.event_time = 2;
  CHECK_THROWS_AS(adapt_local_projection(panel, spec, {0}), PreconditionError);
  CHECK_THROWS_AS(adapt_local_projection(panel, spec, {1, -2}), PreconditionError);
}

TEST_CASE("binary pre-period mix: conditioning removes the trend bias") {
  // Y_1 is +-1 with P(+1) = 0.25 for adopters and 0.75 for controls;
  // Y_2 = 2*Y_1 + tau*W + noise. Conditioning on Y_1 recovers tau = 1.5 while
  // the unconditional trend contrast is biased down by exactly 1.
  LongPanel panel;
  rng::Stream s(81, 0);
  const double tau = 1.5;
  for (int i = 0; i < 2000; ++i) {
    const bool treated = s.next_bernoulli(0.5);
    const double p_pos = treated ? 0.25 : 0.75;
    const double y1 = s.next_bernoulli(p_pos) ? 1.0 : -1.0;
    const double y2 = 2.0 * y1 + (treated ? tau : 0.0) + 0.5 * s.next_normal();
    const std::string id = "u" + std::to_string(i);
    const std::optional<int> adopt = treated ? std::optional<int>(2) : std::nullopt;
    panel.rows.push_back(lrow(id, 1, y1, adopt));
    panel.rows.push_back(lrow(id, 2, y2, adopt));
  }
  panel.validate_and_finalize();

  CellSpec spec;
  spec.style = CellStyle::LocalProjectionDidm;
  spec.event_time = 2;
  spec.horizon = 0;
  const CanonicalDataset ds = adapt_local_projection(panel, spec, {1});
  MethodSpec nn;
  nn.kind = MethodKind::NearestNeighbor;
  nn.k = 1;  // on binary support, k=1 with tie averaging is exact cell matching
  const BracketReport report = estimate_all(ds, nn);
  CHECK(std::abs(report.didm.value - tau) < 0.15);
  CHECK(std::abs(report.did.value - (tau - 1.0)) < 0.15);
}

TEST_CASE("adapter output is invariant to input row order") {
  LongPanel panel;
  rng::Stream s(82, 0);
  for (int i = 0; i < 40; ++i) {
    const std::string id = "unit" + std::to_string(i);
    const std::optional<int> adopt =
        i % 3 == 0 ? std::optional<int>(3) : (i % 3 == 1 ? std::optional<int>(5)
                                                          : std::nullopt);
    for (int t = 0; t < 6; ++t) {
      panel.rows.push_back(lrow(id, t, s.next_normal(), adopt));
    }
  }
  panel.validate_and_finalize();

  LongPanel shuffled = panel;
  std::mt19937 gen(99);
  std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), gen);
  shuffled.validate_and_finalize();

  CellSpec spec;
  spec.event_time = 3;
  spec.horizon = 1;
  spec.n_lags = 2;
  const CanonicalDataset a = adapt_lag_matched(panel, spec);
  const CanonicalDataset b = adapt_lag_matched(shuffled, spec);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].unit_id == b.records[i].unit_id);
    CHECK(a.records[i].w == b.records[i].w);
    CHECK(a.records[i].y_lag == b.records[i].y_lag);
    CHECK(a.records[i].covariates == b.records[i].covariates);
  }
}

TEST_CASE("staggered adoption with parallel trends recovers the effect") {
  LongPanel panel;
  rng::Stream s(83, 0);
  const double tau = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double unit_effect = s.next_normal();
    const int draw = static_cast<int>(s.next_below(4));
    const std::optional<int> adopt =
        draw < 3 ? std::optional<int>(3 + draw) : std::nullopt;
    const std::string id = "u" + std::to_string(i);
    for (int t = 0; t < 8; ++t) {
      const double time_effect = 0.5 * t;
      const bool on = adopt.has_value() && t >= *adopt;
      panel.rows.push_back(
          lrow(id, t, unit_effect + time_effect + (on ? tau : 0.0) + 0.1 * s.next_normal(),
               adopt));
    }
  }
  panel.validate_and_finalize();

  CellSpec spec;
  spec.event_time = 4;
  spec.horizon = 0;
  spec.n_lags = 1;
  const CanonicalDataset ds = adapt_lag_matched(panel, spec);
  MethodSpec nn;
  nn.kind = MethodKind::NearestNeighbor;
  nn.k = 1;
  const BracketReport report = estimate_all(ds, nn);
  CHECK(std::abs(report.m.value - tau) < 0.2);
  CHECK(std::abs(report.didm.value - tau) < 0.2);
  CHECK(std::abs(report.did.value - tau) < 0.1);
}

TEST_CASE("cohort cells agree with a brute-force scan over the raw rows") {
  LongPanel panel;
  rng::Stream s(84, 0);
  for (int i = 0; i < 50; ++i) {
    const std::string id = "u" + std::to_string(i);
    const int draw = static_cast<int>(s.next_below(5));
    const std::optional<int> adopt =
        draw < 4 ? std::optional<int>(2 + draw) : std::nullopt;
    for (int t = 0; t < 7; ++t) {
      if (i % 7 == 0 && t == 5) continue;  // sprinkle missing periods
      panel.rows.push_back(lrow(id, t, s.next_normal(), adopt));
    }
  }
  panel.validate_and_finalize();

  auto outcome_at = [&](const std::string& id, int time) -> std::optional<double> {
    for (const auto& row : panel.rows) {
      if (row.unit_id == id && row.time == time) return row.outcome;
    }
    return std::nullopt;
  };
  auto adoption_of = [&](const std::string& id) -> std::optional<int> {
    for (const auto& row : panel.rows) {
      if (row.unit_id == id) return row.treated_at;
    }
    return std::nullopt;
  };
  std::vector<std::string> unit_ids;
  for (const auto& row : panel.rows) {
    if (std::find(unit_ids.begin(), unit_ids.end(), row.unit_id) == unit_ids.end()) {
      unit_ids.push_back(row.unit_id);
    }
  }

  for (int g = 2; g <= 5; ++g) {
    for (int t = g; t < 7; ++t) {
      double sum_cohort = 0.0, sum_cmp = 0.0;
      std::size_t n_cohort = 0, n_cmp = 0;
      for (const auto& id : unit_ids) {
        const std::optional<int> adopt = adoption_of(id);
        const bool in_cohort = adopt.has_value() && *adopt == g;
        const bool in_cmp = !adopt.has_value() || *adopt >= t + 1;
        if (!in_cohort && !in_cmp) continue;
        const auto y_pre = outcome_at(id, g - 1);
        const auto y_post = outcome_at(id, t);
        if (!y_pre || !y_post) continue;
        if (in_cohort) {
          sum_cohort += *y_post - *y_pre;
          ++n_cohort;
        } else {
          sum_cmp += *y_post - *y_pre;
          ++n_cmp;
        }
      }

      CellSpec spec;
      spec.style = CellStyle::CohortDid;
      spec.event_time = g;
      spec.horizon = t - g;
      if (n_cohort == 0 || n_cmp == 0) {
        CHECK_THROWS_AS(adapt_cohort_did(panel, spec), ComputationError);
        continue;
      }
      const double oracle = sum_cohort / static_cast<double>(n_cohort) -
                            sum_cmp / static_cast<double>(n_cmp);
      const CanonicalDataset ds = adapt_cohort_did(panel, spec);
      CHECK(estimate_did(ds).value == doctest::Approx(oracle).epsilon(1e-12));
    }
  }
}

}  // TEST_SUITE
