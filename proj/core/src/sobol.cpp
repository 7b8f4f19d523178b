#include "extmil/sobol.hpp"

#include <bit>
#include <initializer_list>
#include <string>

#include "extmil/errors.hpp"

namespace extmil {

namespace {

struct DirectionEntry {
  std::uint32_t polynomial;
  std::initializer_list<std::uint32_t> initial;
};

const DirectionEntry kDirectionTable[] = {
#include "sobol_directions.inc"
};

static_assert(std::size(kDirectionTable) >= SobolSequence::kMaxDimensions);

}  // namespace

SobolSequence::SobolSequence(std::size_t dimensions)
    : dims_(dimensions), directions_(dimensions * kBits) {
  require(dimensions >= 1, "SobolSequence: need at least one dimension");
  if (dimensions > kMaxDimensions) {
    throw ContractViolation("SobolSequence: " + std::to_string(dimensions) +
                            " dimensions requested, direction table holds " +
                            std::to_string(kMaxDimensions));
  }
  std::vector<std::uint64_t> m(kBits);
  for (std::size_t dim = 0; dim < dims_; ++dim) {
    const auto& entry = kDirectionTable[dim];
    if (dim == 0) {
      std::fill(m.begin(), m.end(), 1);
    } else {
      const std::uint32_t p = entry.polynomial;
      const int degree = std::bit_width(p) - 1;
      int k = 0;
      for (std::uint32_t v : entry.initial) m[k++] = v;
      // m_k = 2^s m_{k-s} ^ m_{k-s} ^ sum_{i=1}^{s-1} 2^i a_i m_{k-i}
      for (; k < kBits; ++k) {
        std::uint64_t value = m[k - degree];
        std::uint64_t pow2 = 1;
        for (int i = 0; i < degree; ++i) {
          pow2 <<= 1;
          if ((p >> (degree - 1 - i)) & 1u) value ^= pow2 * m[k - i - 1];
        }
        m[k] = value;
      }
    }
    for (int k = 0; k < kBits; ++k) {
      directions_[dim * kBits + k] = static_cast<std::uint32_t>(m[k] << (kBits - 1 - k));
    }
  }
}

void SobolSequence::point(std::uint64_t index, std::span<std::uint32_t> out) const {
  require(out.size() <= dims_, "SobolSequence::point: output longer than the dimension");
  require(index < (std::uint64_t{1} << kBits), "SobolSequence::point: index exceeds 2^32");
  std::fill(out.begin(), out.end(), 0u);
  for (int bit = 0; index != 0; ++bit, index >>= 1) {
    if ((index & 1u) == 0) continue;
    for (std::size_t dim = 0; dim < out.size(); ++dim) out[dim] ^= directions_[dim * kBits + bit];
  }
}

}  // namespace extmil
