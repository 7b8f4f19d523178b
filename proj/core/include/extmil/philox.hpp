#pragma once

#include <array>
#include <cstdint>

namespace extmil {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A pure
/// function of (counter, key): no state, so any worker can produce any
/// block of any stream.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key);
};

/// Maps 64 random bits to a double in the open interval (0, 1): the top 52
/// bits plus a half-cell offset, so the extremes are 2^-53 and 1 - 2^-53.
inline double bits_to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace extmil
