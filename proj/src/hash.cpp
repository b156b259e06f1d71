#include "memfail/hash.hpp"

#include <fmt/format.h>

namespace memfail {

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace memfail
