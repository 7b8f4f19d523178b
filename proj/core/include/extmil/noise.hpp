#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "extmil/sobol.hpp"
#include "extmil/tensor.hpp"

namespace extmil {

enum class NoiseKind { PseudoRandom, RandomizedSobol };

std::string to_string(NoiseKind kind);

/// Source of per-path Gaussian increments. Coordinate `dim` of path `p` is a
/// pure function of (kind, seed, replication_index, p, dim); step k and noise
/// column j map to dim = k * d + j. The object is immutable and may be shared
/// by any number of workers.
///
/// PseudoRandom: Philox4x32-10 keyed by the seed, counter (dim / 2,
///   replication, path), 53-bit uniforms pushed through Phi^{-1}.
/// RandomizedSobol: point `path_index` of a Sobol sequence in dims_per_path
///   dimensions, digitally shifted by a Philox-derived 32-bit word per
///   dimension (one shift per replication). With the shift disabled the
///   origin is skipped, i.e. path p uses Sobol point p + 1.
class NoiseSource {
 public:
  static NoiseSource pseudo_random(std::uint64_t seed, std::size_t dims_per_path,
                                   std::uint32_t replication_index = 0);
  static NoiseSource randomized_sobol(std::uint64_t seed, std::size_t dims_per_path,
                                      std::uint32_t replication_index, bool digital_shift = true);

  NoiseKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t dims_per_path() const { return dims_; }
  std::uint32_t replication_index() const { return replication_; }

  /// Fills `out` with the first out.size() standard normal coordinates of a path.
  void standard_normals(std::uint64_t path_index, std::span<double> out) const;

  /// Uniform (0,1) coordinates before the Gaussian map.
  void uniforms(std::uint64_t path_index, std::span<double> out) const;

  /// n x d matrix of Brownian increments (each N(0, h)) for one path.
  Matrix gaussian_increments(std::uint64_t path_index, std::size_t n, std::size_t d, double h) const;

 private:
  NoiseSource(NoiseKind kind, std::uint64_t seed, std::size_t dims, std::uint32_t replication);

  NoiseKind kind_;
  std::uint64_t seed_;
  std::size_t dims_;
  std::uint32_t replication_;
  bool shifted_ = false;
  std::shared_ptr<const SobolSequence> sobol_;
  std::vector<std::uint32_t> shift_;
};

}  // namespace extmil
