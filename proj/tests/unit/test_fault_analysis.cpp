#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "memfail/fault_analysis.hpp"
#include "memfail/random.hpp"
#include "oracles.hpp"

using namespace memfail;
using testing::at_min;

namespace {

ErrorBitmap bits(std::initializer_list<std::pair<int, int>> beat_dq) {
  ErrorBitmap b;
  for (auto [beat, dq] : beat_dq) b.set(beat, dq);
  return b;
}

CeEvent at(int minute, CellAddress cell, int count = 1) {
  return CeEvent{at_min(minute), testing::dimm(0), cell, bits({{0, 0}}), count};
}

int scope_rank(DeviceScope s) { return static_cast<int>(s); }

}  // namespace

TEST_CASE("bit pattern anchor and edge cases") {
  const auto anchor = bit_pattern_stats(bits({{0, 1}, {4, 3}}));
  CHECK(anchor.dq_count == 2);
  CHECK(anchor.beat_count == 2);
  CHECK(anchor.beat_interval == 4);
  CHECK(anchor.dq_interval == 2);

  const auto single = bit_pattern_stats(bits({{5, 2}}));
  CHECK(single == BitPatternStats{1, 1, 0, 0});

  CHECK(bit_pattern_stats(ErrorBitmap::from_word(0x0f0f0f0f0f0f0f0full)) == BitPatternStats{4, 8, 3, 7});
  CHECK(bit_pattern_stats(ErrorBitmap{}) == BitPatternStats{});
}

TEST_CASE("adjacent-gap interval mode") {
  const auto b = bits({{0, 0}, {1, 1}, {6, 3}});
  CHECK(bit_pattern_stats(b, IntervalMode::span).beat_interval == 6);
  CHECK(bit_pattern_stats(b, IntervalMode::adjacent_gap).beat_interval == 5);
  CHECK(bit_pattern_stats(b, IntervalMode::adjacent_gap).dq_interval == 2);
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const auto r = ErrorBitmap::from_word(rng.next() & 0x0f0f0f0f0f0f0f0full);
    CHECK(bit_pattern_stats(r, IntervalMode::adjacent_gap) == oracle::bit_scan(r, true));
  }
}

TEST_CASE("bit pattern stats match a naive scan and respect bounds") {
  Rng rng(17);
  for (int i = 0; i < 5000; ++i) {
    const auto b = ErrorBitmap::from_word(rng.next() & (rng.bernoulli(0.5) ? 0x0f0f0f0f0f0f0f0full : ~0ull));
    const auto s = bit_pattern_stats(b);
    CHECK(s == oracle::bit_scan(b));
    CHECK(s.beat_interval < 8);
    CHECK((s.dq_count == 0) == b.empty());
  }
}

TEST_CASE("OR aggregation dominates each component") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto ev = oracle::random_ces(rng, testing::dimm(0), 50, 0, 100'000);
    std::sort(ev.begin(), ev.end(), [](const CeEvent& a, const CeEvent& b) { return a.timestamp < b.timestamp; });
    const TimeRange w{from_epoch_ms(20'000), from_epoch_ms(80'000)};
    const auto agg = aggregate_bit_patterns(ev, w);
    CHECK(agg == oracle::or_then_scan(ev, w));
    for (const auto& e : ev) {
      if (!w.contains(e.timestamp)) continue;
      const auto s = bit_pattern_stats(e.bitmap);
      CHECK(agg.dq_count >= s.dq_count);
      CHECK(agg.beat_count >= s.beat_count);
    }
  }
  CHECK(aggregate_bit_patterns({}) == BitPatternStats{});
  std::vector<CeEvent> two = {CeEvent{at_min(1), testing::dimm(0), {}, bits({{1, 0}}), 1},
                              CeEvent{at_min(2), testing::dimm(0), {}, bits({{5, 0}}), 1}};
  const auto s = aggregate_bit_patterns(two);
  CHECK(s.beat_count == 2);
  CHECK(s.beat_interval == 4);
}

TEST_CASE("classify_faults basic shapes") {
  const FaultThresholds th;
  CHECK(classify_faults({}, th) == FaultDiagnosis{});

  std::vector<CeEvent> row;
  for (int c = 0; c < 5; ++c) row.push_back(at(c, CellAddress{0, 4, 1, 2, 100, c * 3}));
  const auto d = classify_faults(row, th);
  CHECK(d.row_faults == 1);
  CHECK(d.column_faults == 0);
  CHECK(d.cell_faults == 0);
  CHECK(d.bank_faults == 0);
  CHECK(d.device_scope == DeviceScope::single_device);
  CHECK(d == oracle::classify(row, th, TimeRange::all()));

  std::vector<CeEvent> cell = {at(1, CellAddress{0, 1, 0, 0, 5, 5}, 2)};
  CHECK(classify_faults(cell, th).cell_faults == 1);

  std::vector<CeEvent> two_devices = {at(1, CellAddress{0, 2, 0, 0, 1, 1}), at(2, CellAddress{0, 7, 0, 0, 1, 1})};
  CHECK(classify_faults(two_devices, th).device_scope == DeviceScope::multi_device);

  std::vector<CeEvent> bank = {at(1, CellAddress{0, 0, 0, 0, 1, 1}), at(2, CellAddress{0, 0, 0, 0, 1, 2}),
                               at(3, CellAddress{0, 0, 0, 0, 2, 1})};
  const auto b = classify_faults(bank, th);
  CHECK(b.row_faults == 1);
  CHECK(b.column_faults == 1);
  CHECK(b.bank_faults == 1);
}

TEST_CASE("rank separates chips") {
  std::vector<CeEvent> ev = {at(1, CellAddress{0, 3, 0, 0, 1, 1}), at(2, CellAddress{1, 3, 0, 0, 1, 2})};
  const auto d = classify_faults(ev, FaultThresholds{});
  CHECK(d.device_scope == DeviceScope::multi_device);
  CHECK(d.row_faults == 0);
}

TEST_CASE("window restricts diagnosis to (begin, end]") {
  std::vector<CeEvent> ev = {at(0, CellAddress{0, 0, 0, 0, 1, 1}), at(10, CellAddress{0, 0, 0, 0, 1, 1})};
  const FaultThresholds th;
  CHECK(classify_faults(ev, th).cell_faults == 1);
  CHECK(classify_faults(ev, th, {at_min(0), at_min(10)}).cell_faults == 0);
  CHECK(classify_faults(ev, th, {at_min(-1), at_min(10)}).cell_faults == 1);
  CHECK(classify_faults(ev, th, {at_min(10), at_min(20)}).device_scope == DeviceScope::none);
}

TEST_CASE("classify_faults matches the grouping oracle on random traces") {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.range(0, 300));
    auto ev = oracle::random_ces(rng, testing::dimm(0), n, 0, 10'000'000);
    std::sort(ev.begin(), ev.end(), [](const CeEvent& a, const CeEvent& b) { return a.timestamp < b.timestamp; });
    FaultThresholds th;
    th.cell_min_ces = static_cast<int>(rng.range(1, 5));
    th.row_min_distinct_columns = static_cast<int>(rng.range(1, 4));
    th.column_min_distinct_rows = static_cast<int>(rng.range(1, 4));
    const TimeRange w = rng.bernoulli(0.5) ? TimeRange::all() : TimeRange{from_epoch_ms(2'000'000), from_epoch_ms(9'000'000)};
    const auto d = classify_faults(ev, th, w);
    CHECK(d == oracle::classify(ev, th, w));
    if (d.bank_faults > 0) {
      CHECK(d.row_faults > 0);
      CHECK(d.column_faults > 0);
    }
  }
}

TEST_CASE("adding events never lowers any fault count") {
  Rng rng(45);
  const FaultThresholds th;
  for (int trial = 0; trial < 50; ++trial) {
    auto ev = oracle::random_ces(rng, testing::dimm(0), 60, 0, 1'000'000);
    std::vector<CeEvent> prefix;
    FaultDiagnosis prev;
    for (const auto& e : ev) {
      prefix.push_back(e);
      const auto d = classify_faults(prefix, th);
      CHECK(d.cell_faults >= prev.cell_faults);
      CHECK(d.row_faults >= prev.row_faults);
      CHECK(d.column_faults >= prev.column_faults);
      CHECK(d.bank_faults >= prev.bank_faults);
      CHECK(scope_rank(d.device_scope) >= scope_rank(prev.device_scope));
      prev = d;
    }
  }
}

TEST_CASE("relative UE rate") {
  std::vector<FaultDiagnosis> diags;
  std::set<DimmId> ue;
  for (int i = 0; i < 10; ++i) {
    FaultDiagnosis d;
    d.dimm = testing::dimm(i);
    d.row_faults = 1;
    d.device_scope = DeviceScope::single_device;
    diags.push_back(d);
    if (i < 3) ue.insert(d.dimm);
  }
  const auto r = relative_ue_rate(diags, ue);
  REQUIRE(r.count(FaultMode::row));
  CHECK(r.at(FaultMode::row).rate == doctest::Approx(0.3));
  CHECK(r.at(FaultMode::row).population == 10);
  CHECK(r.at(FaultMode::row).ue_dimms == 3);
  CHECK_FALSE(r.count(FaultMode::bank));
  CHECK_FALSE(r.count(FaultMode::multi_device));
  CHECK(relative_ue_rate({}, {}).empty());
}

TEST_CASE("relative UE rate is invariant under DIMM relabelling") {
  Rng rng(46);
  std::vector<FaultDiagnosis> diags;
  std::set<DimmId> ue;
  std::vector<FaultDiagnosis> renamed;
  std::set<DimmId> ue_renamed;
  for (int i = 0; i < 200; ++i) {
    FaultDiagnosis d;
    d.dimm = testing::dimm(i);
    d.cell_faults = static_cast<int>(rng.range(0, 2));
    d.row_faults = static_cast<int>(rng.range(0, 1));
    d.column_faults = static_cast<int>(rng.range(0, 1));
    d.bank_faults = d.row_faults && d.column_faults ? static_cast<int>(rng.range(0, 1)) : 0;
    d.device_scope = static_cast<DeviceScope>(rng.range(0, 2));
    diags.push_back(d);
    const bool failed = rng.bernoulli(0.3);
    if (failed) ue.insert(d.dimm);
    auto r = d;
    r.dimm = DimmId{"other-" + std::to_string(199 - i), 0, 0, 0};
    renamed.push_back(r);
    if (failed) ue_renamed.insert(r.dimm);
  }
  const auto a = relative_ue_rate(diags, ue);
  const auto b = relative_ue_rate(renamed, ue_renamed);
  REQUIRE(a.size() == b.size());
  for (const auto& [m, r] : a) {
    CHECK(r.rate >= 0.0);
    CHECK(r.rate <= 1.0);
    CHECK(b.at(m).rate == r.rate);
    CHECK(b.at(m).population == r.population);
  }
}

TEST_CASE("threshold JSON round-trips") {
  FaultThresholds th;
  th.cell_min_ces = 4;
  th.analysis_window = hours(7);
  CHECK(thresholds_from_json(to_json(th)) == th);
  FaultThresholds bad;
  bad.row_min_distinct_columns = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}
