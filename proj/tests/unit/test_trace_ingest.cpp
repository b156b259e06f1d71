#include <doctest.h>

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "helpers.hpp"
#include "memfail/ingest.hpp"
#include "memfail/random.hpp"
#include "memfail/trace_io.hpp"
#include "oracles.hpp"

using namespace memfail;
using testing::at_min;

namespace {

// Word bit of (beat, dq) under the beat-major layout.
std::uint64_t bit_of(int beat, int dq) { return std::uint64_t{1} << (8 * (7 - beat) + dq); }

EventLog sample_log() {
  Rng rng(21);
  EventLog log;
  for (int i = 0; i < 4; ++i) {
    auto ces = oracle::random_ces(rng, testing::dimm(i), 25, 1'700'000'000'000, 86'400'000);
    log.ces.insert(log.ces.end(), ces.begin(), ces.end());
  }
  log.ues.push_back({at_min(100), testing::dimm(1), std::nullopt, false});
  log.ues.push_back({at_min(200), testing::dimm(2), CellAddress{1, 2, 0, 1, 55, 9}, true});
  log.ces[3].dimm.server_id = "rack,7 \"b\"";
  return log;
}

}  // namespace

TEST_CASE("decode_bitmap bit positions") {
  CHECK(decode_bitmap("0000000000000000", DataWidth::x4).empty());
  const auto top = decode_bitmap("8000000000000000", DataWidth::x8);
  CHECK(top.word() == bit_of(0, 7));
  CHECK(top.test(0, 7));
  CHECK(top.popcount() == 1);
  CHECK(decode_bitmap("0800000000000000", DataWidth::x4).test(0, 3));
  CHECK(decode_bitmap("0000000000000001", DataWidth::x4).test(7, 0));
  for (int beat = 0; beat < 8; ++beat) {
    for (int dq = 0; dq < 4; ++dq) {
      const auto b = decode_bitmap(fmt::format("{:016x}", bit_of(beat, dq)), DataWidth::x4);
      CHECK(b.test(beat, dq));
      CHECK(b.popcount() == 1);
    }
  }
}

TEST_CASE("decode_bitmap rejects bad input") {
  auto code_of = [](std::string_view hex, DataWidth w) {
    try {
      decode_bitmap(hex, w);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  };
  CHECK(code_of("8000000000000000", DataWidth::x4) == ErrorCode::malformed_bitmap);
  CHECK(code_of("00000000000000", DataWidth::x4) == ErrorCode::malformed_hex);
  CHECK(code_of("000000000000000g", DataWidth::x4) == ErrorCode::malformed_hex);
  CHECK(code_of("0x00000000000001", DataWidth::x4) == ErrorCode::malformed_hex);
  CHECK(decode_bitmap("0A0B0C0D0E0F0102", DataWidth::x8) == decode_bitmap("0a0b0c0d0e0f0102", DataWidth::x8));
}

TEST_CASE("decode after encode is the identity on random bitmaps") {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const auto b = oracle::random_x4_bitmap(rng);
    const auto hex = encode_bitmap(b);
    CHECK(hex.size() == 16);
    CHECK(decode_bitmap(hex, DataWidth::x4) == b);
    CHECK(encode_bitmap(decode_bitmap(hex, DataWidth::x4)) == hex);
  }
}

TEST_CASE("JSONL export and parse round-trip") {
  const auto log = sample_log();
  std::stringstream ss;
  write_trace_jsonl(ss, log);
  const auto r = parse_jsonl_trace(ss);
  CHECK(r.rejects.empty());
  CHECK(r.data_lines == log.ces.size() + log.ues.size());
  auto sorted = [](EventLog l) {
    std::sort(l.ces.begin(), l.ces.end(), ce_less);
    std::sort(l.ues.begin(), l.ues.end(), ue_less);
    return l;
  };
  const auto a = sorted(log);
  const auto b = sorted(r.events);
  CHECK(a.ces == b.ces);
  CHECK(a.ues == b.ues);
}

TEST_CASE("JSONL rejects carry line and column") {
  std::stringstream ss;
  ss << R"({"kind":"ce","ts":1,"dimm":{"server":"a","socket":0,"channel":0,"slot":0},)"
     << R"("cell":{"rank":0,"device":0,"bank_group":0,"bank":0,"row":1,"column":2},"bitmap":"0100000000000000"})" << '\n'
     << '\n'
     << R"({"kind":"ce","ts":2,"dimm":{"server":"a","socket":0,"channel":0,"slot":0},)"
     << R"("cell":{"rank":0,"device":0,"bank_group":0,"bank":0,"row":1,"column":2},"bitmap":"0000000000000000"})" << '\n'
     << R"({"kind":"xe","ts":3})" << '\n'
     << "{not json\n";
  const auto r = parse_jsonl_trace(ss);
  CHECK(r.events.ces.size() == 1);
  CHECK(r.data_lines == 4);
  REQUIRE(r.rejects.size() == 3);
  CHECK(r.rejects[0].line == 3);
  CHECK(r.rejects[0].raw.substr(r.rejects[0].column - 1, 8) == "\"bitmap\"");
  CHECK(r.rejects[0].diagnostics.at(0).find("malformed-bitmap") != std::string::npos);
  CHECK(r.rejects[1].line == 4);
  CHECK(r.rejects[1].column == 2);
  CHECK(r.rejects[2].line == 5);
  for (const auto& rej : r.rejects) CHECK_FALSE(rej.diagnostics.empty());
}

TEST_CASE("reject ceiling aborts parsing") {
  std::stringstream ss("garbage\n{}\n");
  try {
    parse_jsonl_trace(ss, {.max_reject_rate = 0.5});
    FAIL("expected reject_ceiling");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::reject_ceiling);
  }
}

TEST_CASE("CSV empty input yields no events") {
  std::stringstream ss;
  const auto r = parse_csv_trace(ss, ColumnMap::canonical());
  CHECK(r.events.empty());
  CHECK(r.data_lines == 0);
}

TEST_CASE("CSV export re-imports to the same events and JSONL") {
  const auto log = sample_log();
  std::stringstream csv;
  write_csv_trace(csv, log);
  const auto r = parse_csv_trace(csv, ColumnMap::canonical());
  CHECK(r.rejects.empty());
  CHECK(r.events.ces == log.ces);
  REQUIRE(r.events.ues.size() == log.ues.size());
  for (std::size_t i = 0; i < log.ues.size(); ++i) {
    CHECK(r.events.ues[i].timestamp == log.ues[i].timestamp);
    CHECK(r.events.ues[i].dimm == log.ues[i].dimm);
    CHECK(r.events.ues[i].cell == log.ues[i].cell);
  }
  std::stringstream j1;
  std::stringstream j2;
  write_trace_jsonl(j1, log.ces, {});
  write_trace_jsonl(j2, r.events.ces, {});
  CHECK(j1.str() == j2.str());
}

TEST_CASE("CSV with a custom column map") {
  ColumnMap map;
  map.timestamp = "time";
  map.server = "host";
  map.bitmap = "syndrome";
  map.width = "w";
  map.delimiter = ';';
  std::stringstream ss;
  ss << "time;host;socket;channel;slot;rank;device;bank_group;bank;row;column;syndrome;w\n"
     << "60000;\"h;1\";0;1;0;0;3;1;2;10;20;0100000000000000;x4\n"
     << "120000;h2;0;1;0;0;3;1;2;10;20;8000000000000000;x8\n"
     << "180000;h2;0;1;0;0;3;1;2;10;20;8000000000000000;x4\n"
     << "240000;h2;0;1;0;0;3;1;2;-1;20;0100000000000000;x4\n"
     << "300000;h2;0;1;0;0;3;1;2;10;20;0000000000000000;x4\n";
  const auto r = parse_csv_trace(ss, map);
  REQUIRE(r.events.ces.size() == 2);
  CHECK(r.events.ces[0].dimm.server_id == "h;1");
  CHECK(r.events.ces[0].cell == CellAddress{0, 3, 1, 2, 10, 20});
  CHECK(r.events.ces[1].bitmap.test(0, 7));
  REQUIRE(r.rejects.size() == 3);
  CHECK(r.rejects[0].line == 4);
  CHECK(r.rejects[1].diagnostics.at(0).find("row") != std::string::npos);
  CHECK(r.rejects[2].diagnostics.at(0).find("malformed-bitmap") != std::string::npos);
  for (const auto& rej : r.rejects) CHECK(rej.column >= 1);

  CHECK(ColumnMap::from_json(map.to_json()).to_json() == map.to_json());
}

TEST_CASE("CSV header without mapped columns is a config error") {
  std::stringstream ss("a,b,c\n1,2,3\n");
  try {
    parse_csv_trace(ss, ColumnMap{});
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }
}

TEST_CASE("parsers survive arbitrary bytes") {
  Rng rng(1234);
  const std::string alphabet = "{}[]\",:;0123456789abcdefx-\n\r\t kindtsceue\\";
  for (int i = 0; i < 500; ++i) {
    std::string blob;
    const auto len = rng.index(400);
    for (std::size_t k = 0; k < len; ++k) {
      blob.push_back(rng.bernoulli(0.3) ? static_cast<char>(rng.index(256))
                                        : alphabet[rng.index(alphabet.size())]);
    }
    std::stringstream a(blob);
    CHECK_NOTHROW(parse_jsonl_trace(a));
    std::stringstream b("kind,ts,server,socket,channel,slot,rank,device,bank_group,bank,row,column,bitmap,count\n" +
                        blob);
    CHECK_NOTHROW(parse_csv_trace(b, ColumnMap::canonical()));
    std::stringstream c(blob);
    try {
      parse_csv_trace(c, ColumnMap::canonical());
    } catch (const Error&) {
    }
  }
}
