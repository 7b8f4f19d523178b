#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace extmil {

/// Unscrambled Sobol sequence in natural (non Gray-code) order with 32-bit
/// resolution, random access by point index. Direction numbers are the
/// Joe-Kuo "new-joe-kuo-6.21201" set, first kMaxDimensions rows.
class SobolSequence {
 public:
  static constexpr std::size_t kMaxDimensions = 1024;
  static constexpr int kBits = 32;

  explicit SobolSequence(std::size_t dimensions);

  std::size_t dimensions() const { return dims_; }

  /// Integer coordinates of point `index`; the real coordinate is value / 2^32.
  void point(std::uint64_t index, std::span<std::uint32_t> out) const;

 private:
  std::size_t dims_;
  std::vector<std::uint32_t> directions_;  // dims_ x kBits
};

}  // namespace extmil
