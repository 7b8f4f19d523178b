#include "extmil/noise.hpp"

#include <cmath>
#include <string>

#include "extmil/errors.hpp"
#include "extmil/inverse_normal.hpp"
#include "extmil/philox.hpp"

namespace extmil {

namespace {

Philox4x32::Key key_of(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Domain separation between per-path draws and per-replication shift words.
constexpr std::uint32_t kShiftStream = 0x5EEDF00Du;

}  // namespace

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::PseudoRandom ? "mc" : "qmc";
}

NoiseSource::NoiseSource(NoiseKind kind, std::uint64_t seed, std::size_t dims, std::uint32_t replication)
    : kind_(kind), seed_(seed), dims_(dims), replication_(replication) {
  require(dims_ >= 1, "NoiseSource: dims_per_path must be positive");
}

NoiseSource NoiseSource::pseudo_random(std::uint64_t seed, std::size_t dims_per_path,
                                       std::uint32_t replication_index) {
  return NoiseSource(NoiseKind::PseudoRandom, seed, dims_per_path, replication_index);
}

NoiseSource NoiseSource::randomized_sobol(std::uint64_t seed, std::size_t dims_per_path,
                                          std::uint32_t replication_index, bool digital_shift) {
  NoiseSource src(NoiseKind::RandomizedSobol, seed, dims_per_path, replication_index);
  src.sobol_ = std::make_shared<SobolSequence>(dims_per_path);
  src.shifted_ = digital_shift;
  src.shift_.assign(dims_per_path, 0u);
  if (digital_shift) {
    const auto key = key_of(seed);
    for (std::size_t dim = 0; dim < dims_per_path; dim += 4) {
      const auto block = Philox4x32::generate(
          {static_cast<std::uint32_t>(dim / 4), replication_index, kShiftStream, 0u}, key);
      for (std::size_t k = 0; k < 4 && dim + k < dims_per_path; ++k) src.shift_[dim + k] = block[k];
    }
  }
  return src;
}

void NoiseSource::uniforms(std::uint64_t path_index, std::span<double> out) const {
  if (out.size() > dims_) {
    throw RuntimeFailure("noise budget exhausted: " + std::to_string(out.size()) +
                         " coordinates requested, source provides " + std::to_string(dims_) +
                         " per path");
  }
  if (kind_ == NoiseKind::PseudoRandom) {
    const auto key = key_of(seed_);
    const auto path_lo = static_cast<std::uint32_t>(path_index);
    const auto path_hi = static_cast<std::uint32_t>(path_index >> 32);
    for (std::size_t dim = 0; dim < out.size(); dim += 2) {
      const auto block = Philox4x32::generate(
          {static_cast<std::uint32_t>(dim / 2), replication_, path_lo, path_hi}, key);
      out[dim] = bits_to_open_unit((std::uint64_t{block[0]} << 32) | block[1]);
      if (dim + 1 < out.size()) out[dim + 1] = bits_to_open_unit((std::uint64_t{block[2]} << 32) | block[3]);
    }
    return;
  }
  const std::uint64_t index = shifted_ ? path_index : path_index + 1;
  std::vector<std::uint32_t> raw(out.size());
  sobol_->point(index, raw);
  for (std::size_t dim = 0; dim < out.size(); ++dim) {
    // Cell midpoint: never 0 or 1.
    out[dim] = (static_cast<double>(raw[dim] ^ shift_[dim]) + 0.5) * 0x1.0p-32;
  }
}

void NoiseSource::standard_normals(std::uint64_t path_index, std::span<double> out) const {
  uniforms(path_index, out);
  for (double& v : out) v = inverse_normal_cdf(v);
}

Matrix NoiseSource::gaussian_increments(std::uint64_t path_index, std::size_t n, std::size_t d,
                                        double h) const {
  require(h > 0.0, "gaussian_increments: step size must be positive");
  Matrix out(n, d);
  standard_normals(path_index, out.data());
  const double scale = std::sqrt(h);
  for (double& v : out.data()) v *= scale;
  return out;
}

}  // namespace extmil
