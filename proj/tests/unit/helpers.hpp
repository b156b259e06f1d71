#pragma once

#include <string>
#include <vector>

#include "memfail/trace_model.hpp"

namespace testing {

using namespace memfail;

inline Timestamp at_min(std::int64_t m) { return from_epoch_ms(1'700'000'000'000 + m * 60'000); }

inline DimmId dimm(int i) { return DimmId{"srv-" + std::to_string(i), i % 2, i % 4, 0}; }

inline DimmMeta meta(const DimmId& d, Platform p = Platform::purley, DataWidth w = DataWidth::x4) {
  return DimmMeta{d, "vendor_a", w, 3200, "1y", p};
}

inline CeEvent ce(const DimmId& d, Timestamp t, CellAddress c = {}, std::uint64_t word = 0x0100000000000000ull,
                  int count = 1) {
  return CeEvent{t, d, c, ErrorBitmap::from_word(word), count};
}

inline UeEvent ue(const DimmId& d, Timestamp t) { return UeEvent{t, d, std::nullopt, false}; }

}  // namespace testing
