#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "memfail/evaluation.hpp"
#include "memfail/random.hpp"
#include "oracles.hpp"

using namespace memfail;
using testing::at_min;

namespace {

PredictionRecord pred(const DimmId& d, Timestamp t, bool positive = true) {
  return PredictionRecord{d, t, positive ? 0.9 : 0.1, positive};
}

double closed_form_virr(double tp, double fp, double fn, double y_c) {
  return (tp - y_c * (tp + fp)) / (tp + fn);
}

}  // namespace

TEST_CASE("metrics on small confusion matrices") {
  const auto m = metrics(0, 0, 1);
  CHECK_FALSE(m.precision.has_value());
  CHECK(*m.recall == 0.0);
  CHECK(*m.f1 == 0.0);
  CHECK_FALSE(metrics(0, 0, 0).f1.has_value());

  const auto full = metrics(9, 1, 3);
  CHECK(*full.precision == doctest::Approx(0.9));
  CHECK(*full.recall == doctest::Approx(0.75));
  CHECK(*full.f1 == doctest::Approx(2 * 0.9 * 0.75 / 1.65));

  CHECK_FALSE(f1_score(0.0, 0.0).has_value());
  CHECK(*f1_score(0.54, 0.80) == doctest::Approx(0.6448).epsilon(1e-3));
}

TEST_CASE("virr closed form and regimes") {
  CHECK(*virr(0.54, 0.80) == doctest::Approx(0.6519).epsilon(1e-3));
  CHECK(*virr(0.61, 0.62) == doctest::Approx(0.5184).epsilon(1e-3));
  CHECK(*virr(0.1, 0.7) == doctest::Approx(0.0));
  CHECK(*virr(0.05, 0.5) == doctest::Approx(-0.5));
  CHECK_FALSE(virr(0.0, 0.5).has_value());
  CHECK(*virr(1.0, 1.0, 0.2) == doctest::Approx(0.8));
}

TEST_CASE("virr_from_counts interruption accounting") {
  const auto b = virr_from_counts(8, 2, 2);
  CHECK(b.v == doctest::Approx(100.0));
  CHECK(b.v1 == doctest::Approx(10.0));
  CHECK(b.v2 == doctest::Approx(20.0));
  CHECK(b.v_prime == doctest::Approx(30.0));
  CHECK(*b.virr == doctest::Approx(0.7));

  const auto none = virr_from_counts(0, 4, 5);
  CHECK(*none.virr == doctest::Approx(-0.1 * 4.0 / 5.0));
  CHECK(*virr_from_counts(7, 0, 0).virr == doctest::Approx(0.9));
  CHECK_FALSE(virr_from_counts(0, 3, 0).virr.has_value());

  const auto m = metrics(8, 2, 2);
  CHECK(*b.virr == doctest::Approx(*virr(*m.precision, *m.recall)));
}

TEST_CASE("virr_from_counts agrees with the closed form on random counts") {
  Rng rng(31);
  for (int i = 0; i < 2000; ++i) {
    const auto tp = rng.range(0, 500);
    const auto fp = rng.range(0, 500);
    const auto fn = rng.range(0, 500);
    const double y_c = rng.uniform();
    const double v_a = 1.0 + 20.0 * rng.uniform();
    const auto b = virr_from_counts(tp, fp, fn, v_a, y_c);
    if (tp + fn == 0) {
      CHECK_FALSE(b.virr.has_value());
      continue;
    }
    CHECK(std::abs(*b.virr - closed_form_virr(tp, fp, fn, y_c)) < 1e-12);
    CHECK(*b.virr <= 1.0 - y_c + 1e-12);
  }
}

TEST_CASE("virr increases with recall and precision above y_c") {
  for (double p = 0.15; p < 1.0; p += 0.05) {
    for (double r = 0.05; r < 0.95; r += 0.05) {
      CHECK(*virr(p, r + 0.05) > *virr(p, r));
      CHECK(*virr(p + 0.05, r) > *virr(p, r));
    }
  }
}

TEST_CASE("a positive with the UE inside its window is a true positive") {
  const WindowConfig w;
  const auto a = testing::dimm(0);
  const auto b = testing::dimm(1);
  const auto c = testing::dimm(2);
  const auto d = testing::dimm(3);
  const std::vector<DimmId> population = {a, b, c, d};
  const std::vector<UeEvent> ues = {testing::ue(a, at_min(1000)), testing::ue(b, at_min(1000))};
  const std::vector<PredictionRecord> preds = {
      pred(a, at_min(1000 - 180)),  // exactly lead before the UE
      pred(b, at_min(1000 - 179)),  // inside the lead time, not a hit
      pred(c, at_min(10)),
      pred(d, at_min(10), false),
  };
  const auto r = match_outcomes(preds, ues, population, w);
  CHECK(r.confusion == Confusion{1, 1, 1, 1});
  CHECK(r.per_dimm[0].outcome == Outcome::tp);
  CHECK(*r.per_dimm[0].first_hit == at_min(820));
  CHECK(r.per_dimm[1].outcome == Outcome::fn);
  CHECK(r.per_dimm[2].outcome == Outcome::fp);
  CHECK(r.per_dimm[3].outcome == Outcome::tn);
  CHECK(r.confusion == oracle::match(preds, ues, population, w));
}

TEST_CASE("predictions outside the population are rejected") {
  const std::vector<DimmId> population = {testing::dimm(0)};
  const std::vector<PredictionRecord> preds = {pred(testing::dimm(5), at_min(1))};
  try {
    match_outcomes(preds, {}, population, WindowConfig{});
    FAIL("expected unknown_dimm");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unknown_dimm);
  }
}

TEST_CASE("matching agrees with the pairwise oracle on random scenarios") {
  Rng rng(77);
  WindowConfig w;
  w.prediction = days(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<DimmId> population;
    std::vector<UeEvent> ues;
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 200; ++i) {
      const auto d = testing::dimm(i);
      population.push_back(d);
      const int n_ue = rng.bernoulli(0.3) ? static_cast<int>(rng.range(1, 3)) : 0;
      for (int k = 0; k < n_ue; ++k) ues.push_back(testing::ue(d, at_min(rng.range(0, 20'000))));
      const auto n_pred = rng.range(0, 30);
      for (std::int64_t k = 0; k < n_pred; ++k) {
        preds.push_back(pred(d, at_min(rng.range(0, 20'000)), rng.bernoulli(0.2)));
      }
    }
    std::sort(ues.begin(), ues.end(), ue_less);
    const auto r = match_outcomes(preds, ues, population, w);
    CHECK(r.confusion == oracle::match(preds, ues, population, w));
    CHECK(r.confusion.total() == 200);
  }
}

TEST_CASE("evaluate reports per-platform counts and tick accounting") {
  const auto a = testing::dimm(0);
  const auto b = testing::dimm(1);
  EventLog log;
  log.ces.push_back(testing::ce(a, at_min(0)));
  log.ces.push_back(testing::ce(b, at_min(0)));
  log.ues.push_back(testing::ue(a, at_min(1000)));
  const std::vector<DimmMeta> meta = {testing::meta(a, Platform::purley), testing::meta(b, Platform::k920)};
  const auto trace = validate_trace(log, meta);
  const std::vector<DimmId> population = {a, b};
  const std::vector<PredictionRecord> preds = {pred(a, at_min(500)), pred(a, at_min(400), false),
                                               pred(b, at_min(500))};
  const auto r = evaluate(preds, trace, population, WindowConfig{}, {.tick_level = true});
  CHECK(r.confusion == Confusion{1, 1, 0, 0});
  CHECK(r.per_platform.at("purley") == Confusion{1, 0, 0, 0});
  CHECK(r.per_platform.at("k920") == Confusion{0, 1, 0, 0});
  REQUIRE(r.tick_confusion.has_value());
  CHECK(*r.tick_confusion == Confusion{1, 1, 1, 0});
  CHECK(*r.virr == doctest::Approx(*r.breakdown.virr));
  const auto j = r.to_json();
  CHECK(j.at("confusion").at("tp") == 1);
  CHECK(j.at("per_platform").contains("k920"));
}

TEST_CASE("empty predictions leave every UE DIMM a false negative") {
  const auto a = testing::dimm(0);
  const auto b = testing::dimm(1);
  const auto c = testing::dimm(2);
  EventLog log;
  for (const auto& d : {a, b, c}) log.ces.push_back(testing::ce(d, at_min(0)));
  log.ues.push_back(testing::ue(a, at_min(50)));
  log.ues.push_back(testing::ue(c, at_min(60)));
  const std::vector<DimmMeta> meta = {testing::meta(a), testing::meta(b), testing::meta(c)};
  const auto trace = validate_trace(log, meta);
  const std::vector<DimmId> population = {a, b, c};
  const auto r = evaluate({}, trace, population, WindowConfig{});
  CHECK(r.confusion == Confusion{0, 0, 2, 1});
  CHECK(*r.metrics.recall == 0.0);
  CHECK_FALSE(r.metrics.precision.has_value());
  CHECK(r.to_json().at("precision").is_null());
}

TEST_CASE("predictions CSV round-trips") {
  Rng rng(5);
  std::vector<PredictionRecord> preds;
  for (int i = 0; i < 100; ++i) {
    preds.push_back({testing::dimm(static_cast<int>(rng.index(10))), at_min(rng.range(0, 5000)), rng.uniform(),
                     rng.bernoulli(0.5)});
  }
  std::stringstream ss;
  write_predictions_csv(ss, preds);
  CHECK(read_predictions_csv(ss) == preds);

  std::stringstream bad("server,socket,channel,slot,t,score,positive\ns,0,0,0,x,0.5,1\n");
  CHECK_THROWS_AS(read_predictions_csv(bad), Error);
}
