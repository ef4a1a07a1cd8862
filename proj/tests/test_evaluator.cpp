#include <doctest.h>

#include <random>

#include "flowcorr/evaluator.hpp"

using namespace flowcorr;

namespace {

CandidateSet candidates_of(std::vector<std::string> ids) {
  CandidateSet cs;
  cs.server_conn = ConnectionId{"S1", {"a", 1}, {"b", 2}, Side::ServerSide};
  for (auto& id : ids) cs.candidates.push_back(ConnectionId{id, {"h", 1}, {"g", 2}, Side::ClientSide});
  return cs;
}

}  // namespace

TEST_CASE("confusion against ground truth") {
  SUBCASE("hit with two false positives in 200 clients") {
    ConfusionMatrix m = confusion(candidates_of({"C1", "C2", "C3"}), "C2", 200);
    CHECK(m.tp == 1);
    CHECK(m.fp == 2);
    CHECK(m.fn == 0);
    CHECK(m.tn == 197);
    CHECK(m.t == 1);
    CHECK(m.nt == 199);
  }
  SUBCASE("empty candidate set is a miss") {
    ConfusionMatrix m = confusion(candidates_of({}), "C2", 200);
    CHECK(m.tp == 0);
    CHECK(m.fp == 0);
    CHECK(m.fn == 1);
    CHECK(m.tn == 199);
  }
  SUBCASE("two clients, both flagged") {
    ConfusionMatrix m = confusion(candidates_of({"C1", "C2"}), "C1", 2);
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    CHECK(m.tn == 0);
  }
  SUBCASE("impossible candidate count") {
    CHECK_THROWS_AS(confusion(candidates_of({"C1", "C2", "C3"}), "C1", 2), ValidationError);
  }
}

TEST_CASE("kpis reproduce the reference matrix") {
  ConfusionMatrix m{1, 0, 2, 197, 1, 199};
  KpiVector v = kpis(m);
  CHECK(v.se == 1.0);
  CHECK(v.sp == doctest::Approx(0.98995).epsilon(1e-4));
  CHECK(v.fpr == doctest::Approx(0.01005).epsilon(1e-3));
  CHECK(v.fnr == 0.0);
  REQUIRE(v.ppv.has_value());
  CHECK(*v.ppv == doctest::Approx(1.0 / 3.0));
  REQUIRE(v.npv.has_value());
  CHECK(*v.npv == 1.0);
}

TEST_CASE("ppv of a one-in-two candidate set is 0.500") {
  ConfusionMatrix m{1, 0, 1, 198, 1, 199};
  KpiVector v = kpis(m);
  REQUIRE(v.ppv.has_value());
  CHECK(*v.ppv == 0.5);
}

TEST_CASE("undefined ppv is flagged, never 0") {
  ConfusionMatrix m = confusion(candidates_of({}), "C2", 200);
  KpiVector v = kpis(m);
  CHECK_FALSE(v.ppv.has_value());
  CHECK(v.se == 0.0);
  CHECK(v.fnr == 1.0);
}

TEST_CASE("kpi identities hold exactly on random matrices") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    int64_t n = std::uniform_int_distribution<int64_t>(1, 5000)(rng);
    ConfusionMatrix m;
    m.nt = n - 1;
    m.tp = std::uniform_int_distribution<int>(0, 1)(rng);
    m.fn = 1 - m.tp;
    m.fp = m.nt > 0 ? std::uniform_int_distribution<int64_t>(0, m.nt)(rng) : 0;
    m.tn = m.nt - m.fp;
    KpiVector v = kpis(m);
    CHECK(v.fpr == 1.0 - v.sp);  // exact
    CHECK(v.fnr == 1.0 - v.se);  // exact
    CHECK(v.se >= 0.0);
    CHECK(v.se <= 1.0);
    CHECK(v.sp >= 0.0);
    CHECK(v.sp <= 1.0);
    if (m.tp + m.fp == 0) CHECK_FALSE(v.ppv.has_value());
    if (m.fn + m.tn == 0) CHECK_FALSE(v.npv.has_value());
  }
}

TEST_CASE("summarize") {
  SUBCASE("single vector has zero std") {
    KpiVector v = kpis(ConfusionMatrix{1, 0, 2, 197, 1, 199});
    KpiSummary s = summarize({v});
    CHECK(s.count == 1);
    CHECK(s.se.mean == v.se);
    CHECK(s.se.stddev == 0.0);
    CHECK(s.ppv.mean == doctest::Approx(*v.ppv));
  }
  SUBCASE("16 hits in 984 attempts averages to about 0.016") {
    std::vector<KpiVector> vectors;
    for (int i = 0; i < 984; ++i) {
      KpiVector v;
      v.se = i < 16 ? 1.0 : 0.0;
      v.fnr = 1.0 - v.se;
      v.sp = 1.0;
      vectors.push_back(v);
    }
    KpiSummary s = summarize(vectors);
    CHECK(s.se.mean == doctest::Approx(16.0 / 984.0));
    CHECK(s.se.mean == doctest::Approx(0.016).epsilon(0.02));
  }
  SUBCASE("two-point series") {
    KpiVector a, b;
    a.se = 0.0;
    b.se = 1.0;
    KpiSummary s = summarize({a, b});
    CHECK(s.se.mean == doctest::Approx(0.5));
    CHECK(s.se.stddev == doctest::Approx(0.5));  // population std
  }
  SUBCASE("undefined entries are excluded with counts") {
    KpiVector a, b;
    a.ppv = 1.0;
    KpiSummary s = summarize({a, b});
    CHECK(s.ppv.mean == doctest::Approx(1.0));
    CHECK(s.ppv.excluded == 1);
  }
  SUBCASE("permutation invariance") {
    KpiVector a, b, c;
    a.se = 0.1;
    b.se = 0.7;
    c.se = 0.4;
    KpiSummary x = summarize({a, b, c});
    KpiSummary y = summarize({c, a, b});
    CHECK(x.se.mean == doctest::Approx(y.se.mean));
    CHECK(x.se.stddev == doctest::Approx(y.se.stddev));
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(summarize({}), ValidationError);
  }
}

TEST_CASE("report rendering") {
  KpiVector v = kpis(ConfusionMatrix{1, 0, 2, 197, 1, 199});
  ReportColumn test_a{"Test A", summarize({v, v}), true};
  ReportColumn victim{"Victim", summarize({v}), true};

  std::string table = render_report_table({test_a, victim});
  CHECK(table.find("Test A") != std::string::npos);
  CHECK(table.find("se") != std::string::npos);
  CHECK(table.find("1.000\xC2\xB1")  != std::string::npos);  // aggregated column
  CHECK(table.find("Victim Detected:") != std::string::npos);
  CHECK(table.find("True") != std::string::npos);
  // single-attempt column renders without ±: sp of the matrix is 0.990
  CHECK(table.find("0.990") != std::string::npos);

  std::string csv = render_report_csv({test_a, victim});
  CHECK(csv.find("kpi,Test A_mean,Test A_std,Test A_excluded") == 0);
  CHECK(csv.find("\nse,1.000,0.000,0") != std::string::npos);
  CHECK(csv.find("victim_detected,true") != std::string::npos);
}
